//! Small statistics toolkit: streaming moments, goodness-of-fit tests and
//! weighted least squares.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Welford accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise merge.
    pub fn merge(&mut self, other: &RunningStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64) * (other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::new();
        for x in iter {
            s.push(x);
        }
        s
    }
}

/// Empirical characteristic function at a single frequency vector.
#[derive(Debug, Clone, Copy)]
pub struct CharFnEstimate {
    pub re: f64,
    pub re_stderr: f64,
    pub im: f64,
    pub im_stderr: f64,
}

pub fn empirical_char_fn<'a, I>(samples: I, xi: &[f64]) -> CharFnEstimate
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut re = RunningStats::new();
    let mut im = RunningStats::new();
    for s in samples {
        let phase: f64 = s.iter().zip(xi).map(|(a, b)| a * b).sum();
        re.push(phase.cos());
        im.push(phase.sin());
    }
    CharFnEstimate {
        re: re.mean(),
        re_stderr: re.stderr(),
        im: im.mean(),
        im_stderr: im.stderr(),
    }
}

/// Asymptotic Kolmogorov survival function `Q(λ) = 2 Σ (-1)^{k-1} e^{-2k²λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let sq = ne.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    KsResult { statistic: d, p_value: kolmogorov_q(lambda) }
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sq = n.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    KsResult { statistic: d, p_value: kolmogorov_q(lambda) }
}

pub fn normal_cdf(mean: f64, std_dev: f64) -> impl Fn(f64) -> f64 {
    let n = Normal::new(mean, std_dev).expect("valid normal parameters");
    move |x| n.cdf(x)
}

#[derive(Debug, Clone, Copy)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Pearson χ² goodness of fit; `expected` holds expected counts.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(Error::Parameter("chi-square needs matching bins, at least 2".into()));
    }
    if expected.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Parameter("expected counts must be positive".into()));
    }
    let statistic: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let diff = o as f64 - e;
            diff * diff / e
        })
        .sum();
    let dof = (observed.len() - 1) as f64;
    let dist = ChiSquared::new(dof).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(ChiSquareResult { statistic, dof, p_value: 1.0 - dist.cdf(statistic) })
}

/// Result of a weighted straight-line fit `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    pub r2: f64,
}

/// Weighted least squares. `slope_stderr` is the model-based standard error
/// `sqrt(1/Sxx)` scaled by the reduced χ² when it exceeds one, so badly
/// specified weights do not yield overconfident slopes.
pub fn weighted_line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() || n != w.len() {
        return Err(Error::Fit("length mismatch".into()));
    }
    if n < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {n}")));
    }
    if w.iter().any(|&wi| !(wi > 0.0) || !wi.is_finite()) {
        return Err(Error::Fit("weights must be positive and finite".into()));
    }
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(&xi, &wi)| wi * (xi - xm).powi(2)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&xi, &yi), &wi)| wi * (xi - xm) * (yi - ym))
        .sum();
    let sxx_scale = x.iter().map(|xi| (xi - xm).abs()).fold(0.0, f64::max);
    if !(sxx > 1e-24 * sw * (1.0 + sxx_scale * sxx_scale)) {
        return Err(Error::Fit("degenerate design matrix".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&xi, &yi), &wi)| wi * (yi - intercept - slope * xi).powi(2))
        .sum();
    let tss: f64 = y.iter().zip(w).map(|(&yi, &wi)| wi * (yi - ym).powi(2)).sum();
    let reduced_chi2 = rss / (n - 2) as f64;
    let slope_stderr = (reduced_chi2.max(1.0) / sxx).sqrt();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    Ok(LineFit { intercept, slope, slope_stderr, r2 })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rx = ranks(x);
    let ry = ranks(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, -3.0, 7.25, 0.5];
        let s: RunningStats = xs.iter().copied().collect();
        let m = xs.iter().sum::<f64>() / 6.0;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 5.0;
        assert!((s.mean() - m).abs() < 1e-14);
        assert!((s.variance() - v).abs() < 1e-12);

        let mut a: RunningStats = xs[..2].iter().copied().collect();
        let b: RunningStats = xs[2..].iter().copied().collect();
        a.merge(&b);
        assert!((a.mean() - m).abs() < 1e-14);
        assert!((a.variance() - v).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Q(1.36) ≈ 0.049, Q(1.63) ≈ 0.0098 (classical 5% and 1% points)
        assert!((kolmogorov_q(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_q(1.6276) - 0.01).abs() < 5e-4);
    }

    #[test]
    fn ks_identical_samples_accept() {
        let a: Vec<f64> = (0..500).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn ks_shifted_samples_reject() {
        let a: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.3).collect();
        assert!(ks_two_sample(&a, &b).p_value < 1e-6);
    }

    #[test]
    fn exact_power_law_slope() {
        let x: Vec<f64> = (0..6).map(|k| (2f64.powi(-k - 2)).ln()).collect();
        let y: Vec<f64> = x.iter().map(|l| 0.5 * l + 0.3).collect();
        let fit = weighted_line_fit(&x, &y, &[1.0; 6]).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!((fit.intercept - 0.3).abs() < 1e-12);
    }

    #[test]
    fn degenerate_design_rejected() {
        assert!(weighted_line_fit(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0], &[1.0; 3]).is_err());
        assert!(weighted_line_fit(&[1.0, 2.0], &[0.0, 1.0], &[1.0; 2]).is_err());
    }

    #[test]
    fn chi_square_perfect_fit() {
        let r = chi_square(&[10, 20, 30], &[10.0, 20.0, 30.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_monotone() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 35.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }
}
