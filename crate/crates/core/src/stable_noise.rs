//! # Stable noise
//!
//! $$
//! \mathbb E\, e^{i\langle \xi, X_t\rangle} = \exp\!\left(-t\,\sigma^\alpha |\xi|^\alpha\right)
//! $$
//!
//! Exact samplers for symmetric (d = 1) and rotation-invariant (d ≥ 2)
//! α-stable increments, plus the Lévy density `|z|^{-(d+α)}` (normalisation
//! constant fixed to one) and the small/large jump split.
//!
//! One-dimensional increments use the Chambers-Mallows-Stuck transform.
//! In higher dimension an increment is a Brownian motion with per-coordinate
//! variance `2s` evaluated at an independent positive (α/2)-stable time
//! `S` with `E e^{-λS} = e^{-λ^{α/2}}`, which is exact in law.

use std::f64::consts::PI;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};

/// Parameters of an isotropic α-stable driver.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StableSpec {
    pub alpha: f64,
    pub dim: usize,
    /// Time-one characteristic-function scale σ.
    pub scale: f64,
}

impl StableSpec {
    /// Accepts `1 < alpha <= 2`; `alpha = 2` is the Gaussian edge case kept
    /// for sampler validation.
    pub fn new(alpha: f64, dim: usize, scale: f64) -> Result<Self> {
        let spec = Self { alpha, dim, scale };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha <= 2.0) {
            return Err(Error::Parameter(format!(
                "stability index must lie in (1, 2], got {}",
                self.alpha
            )));
        }
        if self.dim == 0 {
            return Err(Error::Parameter("dimension must be at least 1".into()));
        }
        if !(self.scale >= 0.0) || !self.scale.is_finite() {
            return Err(Error::Parameter(format!("scale must be finite and >= 0, got {}", self.scale)));
        }
        Ok(())
    }

    /// Simulation entry points for the slow-fast system require `1 < α < 2`.
    pub fn validate_for_simulation(&self) -> Result<()> {
        self.validate()?;
        if self.alpha >= 2.0 {
            return Err(Error::Parameter(format!(
                "slow-fast simulation requires 1 < alpha < 2, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Exact characteristic function `exp(-dt σ^α |ξ|^α)`.
    pub fn char_fn(&self, xi_norm: f64, dt: f64) -> f64 {
        (-dt * self.scale.powf(self.alpha) * xi_norm.abs().powf(self.alpha)).exp()
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("time step must be positive and finite, got {dt}")))
    }
}

/// Standard symmetric α-stable variate with `E e^{iξX} = e^{-|ξ|^α}`
/// (Chambers-Mallows-Stuck).
#[inline]
pub fn standard_symmetric<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    let v = PI * (u - 0.5);
    let w: f64 = rng.sample::<f64, _>(Exp1).max(f64::MIN_POSITIVE);
    if alpha == 2.0 {
        return 2.0 * v.sin() * w.sqrt();
    }
    let inv_alpha = 1.0 / alpha;
    let s1 = (alpha * v).sin() / v.cos().powf(inv_alpha);
    let s2 = (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) * inv_alpha);
    s1 * s2
}

/// Positive stable variate with Laplace transform `e^{-λ^β}`, `0 < β <= 1`
/// (Kanter's representation).
#[inline]
pub fn positive_stable<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    if beta == 1.0 {
        return 1.0;
    }
    let u: f64 = PI * rng.sample::<f64, _>(Open01);
    let w: f64 = rng.sample::<f64, _>(Exp1).max(f64::MIN_POSITIVE);
    let s1 = (beta * u).sin() / u.sin().powf(1.0 / beta);
    let s2 = (((1.0 - beta) * u).sin() / w).powf((1.0 - beta) / beta);
    s1 * s2
}

/// One increment of a symmetric α-stable process over `dt`.
pub fn sample_stable_1d<R: Rng + ?Sized>(spec: &StableSpec, dt: f64, rng: &mut R) -> Result<f64> {
    spec.validate()?;
    check_dt(dt)?;
    if spec.dim != 1 {
        return Err(Error::Parameter(format!("expected dim = 1, got {}", spec.dim)));
    }
    Ok(spec.scale * dt.powf(1.0 / spec.alpha) * standard_symmetric(spec.alpha, rng))
}

/// One increment of an isotropic α-stable process in `R^dim` over `dt`.
pub fn sample_isotropic_stable<R: Rng + ?Sized>(
    spec: &StableSpec,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    spec.validate()?;
    check_dt(dt)?;
    let mut out = vec![0.0; spec.dim];
    IncrementSampler::new(*spec, dt)?.fill(rng, &mut out);
    Ok(out)
}

/// Pre-validated sampler for repeated increments over a fixed step; this is
/// what integrators call in their inner loops.
#[derive(Debug, Clone, Copy)]
pub struct IncrementSampler {
    spec: StableSpec,
    factor: f64,
}

impl IncrementSampler {
    pub fn new(spec: StableSpec, dt: f64) -> Result<Self> {
        spec.validate()?;
        check_dt(dt)?;
        Ok(Self { spec, factor: spec.scale * dt.powf(1.0 / spec.alpha) })
    }

    pub fn spec(&self) -> &StableSpec {
        &self.spec
    }

    #[inline]
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.spec.dim);
        let alpha = self.spec.alpha;
        if out.len() == 1 {
            out[0] = self.factor * standard_symmetric(alpha, rng);
            return;
        }
        let s = positive_stable(alpha / 2.0, rng);
        let radial = self.factor * (2.0 * s).sqrt();
        for o in out.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *o = radial * g;
        }
    }
}

/// Lévy density `|z|^{-(dim+α)}` with unit normalisation.
pub fn levy_density(z: &[f64], alpha: f64, dim: usize) -> Result<f64> {
    if z.len() != dim {
        return Err(Error::Parameter(format!("vector length {} does not match dim {dim}", z.len())));
    }
    let r = norm(z);
    if r == 0.0 {
        return Err(Error::Singularity);
    }
    Ok(r.powf(-(dim as f64 + alpha)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub size: Vec<f64>,
}

/// Partition jumps into `|Δ| <= threshold` (small) and `> threshold` (large).
///
/// Lévy measures here are symmetric, so the small-jump compensator has zero
/// drift and no correction is applied to the small part.
pub fn split_increment(jumps: &[Jump], threshold: f64) -> Result<(Vec<Jump>, Vec<Jump>)> {
    if !(threshold > 0.0) {
        return Err(Error::Parameter(format!("threshold must be positive, got {threshold}")));
    }
    Ok(jumps.iter().cloned().partition(|j| norm(&j.size) <= threshold))
}

#[inline]
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use crate::rng::replica_rng;
    use crate::stats::{chi_square, empirical_char_fn, ks_one_sample, ks_two_sample, normal_cdf};

    fn draws(spec: StableSpec, dt: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = replica_rng(seed, 0);
        let s = IncrementSampler::new(spec, dt).unwrap();
        (0..n)
            .map(|_| {
                let mut v = vec![0.0; spec.dim];
                s.fill(&mut rng, &mut v);
                v
            })
            .collect()
    }

    #[test]
    fn spec_validation() {
        assert!(StableSpec::new(1.0, 1, 1.0).is_err());
        assert!(StableSpec::new(2.1, 1, 1.0).is_err());
        assert!(StableSpec::new(1.5, 0, 1.0).is_err());
        assert!(StableSpec::new(1.5, 1, -1.0).is_err());
        assert!(StableSpec::new(2.0, 1, 1.0).is_ok());
        assert!(StableSpec::new(2.0, 1, 1.0).unwrap().validate_for_simulation().is_err());
        let mut rng = replica_rng(0, 0);
        let spec = StableSpec::new(1.5, 1, 1.0).unwrap();
        assert!(sample_stable_1d(&spec, 0.0, &mut rng).is_err());
        assert!(sample_stable_1d(&spec, -1.0, &mut rng).is_err());
        assert!(sample_isotropic_stable(&spec, f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn gaussian_edge_case_has_variance_two() {
        let spec = StableSpec::new(2.0, 1, 1.0).unwrap();
        let mut rng = replica_rng(11, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| sample_stable_1d(&spec, 1.0, &mut rng).unwrap()).collect();
        let r = ks_one_sample(&xs, normal_cdf(0.0, 2f64.sqrt()));
        assert!(r.p_value > 0.01, "{r:?}");
    }

    #[test]
    fn char_fn_alpha_1_5() {
        let spec = StableSpec::new(1.5, 1, 1.0).unwrap();
        let xs = draws(spec, 1.0, 1_000_000, 3);
        for xi in [0.5, 1.0, 2.0] {
            let est = empirical_char_fn(xs.iter().map(|v| v.as_slice()), &[xi]);
            let exact = (-xi.powf(1.5)).exp();
            assert!((est.re - exact).abs() <= 3.0 * est.re_stderr, "ξ={xi}: {est:?} vs {exact}");
            assert!(est.im.abs() <= 3.0 * est.im_stderr);
        }
    }

    #[test]
    fn tail_slope_matches_alpha() {
        let spec = StableSpec::new(1.5, 1, 1.0).unwrap();
        let mut rng = replica_rng(5, 0);
        let n = 10_000_000usize;
        let thresholds: Vec<f64> = (0..=10).map(|k| 10f64.powf(1.0 + k as f64 / 10.0)).collect();
        let mut counts = vec![0u64; thresholds.len()];
        for _ in 0..n {
            let a = standard_symmetric(spec.alpha, &mut rng).abs();
            for (c, &t) in counts.iter_mut().zip(&thresholds) {
                if a > t {
                    *c += 1;
                } else {
                    break;
                }
            }
        }
        let lx: Vec<f64> = thresholds.iter().map(|t| t.ln()).collect();
        let ly: Vec<f64> = counts.iter().map(|&c| (c as f64 / n as f64).ln()).collect();
        let fit = crate::stats::weighted_line_fit(&lx, &ly, &vec![1.0; lx.len()]).unwrap();
        assert!((fit.slope + 1.5).abs() < 0.1, "slope {}", fit.slope);
    }

    #[test]
    fn dim_one_isotropic_matches_1d_sampler() {
        let spec = StableSpec::new(1.5, 1, 0.7).unwrap();
        let mut r1 = replica_rng(21, 0);
        let mut r2 = replica_rng(21, 1);
        let a: Vec<f64> = (0..20_000).map(|_| sample_stable_1d(&spec, 0.3, &mut r1).unwrap()).collect();
        let b: Vec<f64> = (0..20_000).map(|_| sample_isotropic_stable(&spec, 0.3, &mut r2).unwrap()[0]).collect();
        assert!(ks_two_sample(&a, &b).p_value > 0.01);
    }

    #[test]
    fn isotropic_2d_char_fn_in_eight_directions() {
        let spec = StableSpec::new(1.5, 2, 1.0).unwrap();
        let xs = draws(spec, 1.0, 400_000, 8);
        let exact = (-1.0f64).exp();
        let mut values = Vec::new();
        for k in 0..8 {
            let th = k as f64 * PI / 4.0;
            let xi = [th.cos(), th.sin()];
            let est = empirical_char_fn(xs.iter().map(|v| v.as_slice()), &xi);
            assert!((est.re - exact).abs() <= 3.0 * est.re_stderr, "dir {k}: {est:?}");
            values.push(est.re);
        }
        let spread = values.iter().cloned().fold(f64::MIN, f64::max) - values.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 0.01, "directional spread {spread}");
    }

    #[test]
    fn gaussian_edge_case_3d_components_iid() {
        let (dt, scale) = (0.5, 1.3);
        let spec = StableSpec::new(2.0, 3, scale).unwrap();
        let xs = draws(spec, dt, 20_000, 4);
        let sd = (2.0 * dt * scale * scale).sqrt();
        for c in 0..3 {
            let comp: Vec<f64> = xs.iter().map(|v| v[c]).collect();
            assert!(ks_one_sample(&comp, normal_cdf(0.0, sd)).p_value > 0.01);
        }
        let corr: f64 = xs.iter().map(|v| v[0] * v[1]).sum::<f64>() / xs.len() as f64 / (sd * sd);
        assert!(corr.abs() < 4.0 / (xs.len() as f64).sqrt());
    }

    #[test]
    fn self_similarity() {
        let spec = StableSpec::new(1.5, 1, 1.0).unwrap();
        let (dt, lambda) = (0.2, 7.0);
        let a: Vec<f64> = draws(spec, dt, 20_000, 30).into_iter().map(|v| v[0]).collect();
        let b: Vec<f64> = draws(spec, dt * lambda, 20_000, 31)
            .into_iter()
            .map(|v| v[0] * lambda.powf(-1.0 / 1.5))
            .collect();
        assert!(ks_two_sample(&a, &b).p_value > 0.01);
    }

    #[test]
    fn angular_part_uniform() {
        for dim in [2usize, 3] {
            let spec = StableSpec::new(1.5, dim, 1.0).unwrap();
            let xs = draws(spec, 1.0, 100_000, 40 + dim as u64);
            // Bin the polar angle of the first two coordinates; for an
            // isotropic law this is uniform in every dimension.
            let bins = 36;
            let mut counts = vec![0u64; bins];
            for v in &xs {
                let th = v[1].atan2(v[0]) + PI;
                counts[((th / (2.0 * PI) * bins as f64) as usize).min(bins - 1)] += 1;
            }
            let expected = vec![xs.len() as f64 / bins as f64; bins];
            assert!(chi_square(&counts, &expected).unwrap().p_value > 0.01);
        }
    }

    #[test]
    fn determinism() {
        let spec = StableSpec::new(1.3, 3, 2.0).unwrap();
        assert_eq!(draws(spec, 0.1, 100, 99), draws(spec, 0.1, 100, 99));
    }

    #[test]
    fn levy_density_values() {
        assert_eq!(levy_density(&[1.0, 0.0], 1.5, 2).unwrap(), 1.0);
        assert!((levy_density(&[2.0, 0.0], 1.5, 2).unwrap() - 0.088_388_347_648_318_44).abs() < 1e-15);
        assert!(matches!(levy_density(&[0.0, 0.0], 1.5, 2), Err(Error::Singularity)));
    }

    #[test]
    fn levy_mass_of_annulus_d1() {
        let f = |z: f64| levy_density(&[z], 1.5, 1).unwrap();
        let q = integrate(&f, 1.0, 10.0, 1e-12).unwrap() + integrate(&f, -10.0, -1.0, 1e-12).unwrap();
        let exact = 2.0 * (1.0 - 10f64.powf(-1.5)) / 1.5;
        assert!((q - exact).abs() < 1e-6);
    }

    #[test]
    fn split_examples() {
        let (s, l) = split_increment(&[], 1.0).unwrap();
        assert!(s.is_empty() && l.is_empty());
        let j = Jump { time: 0.1, size: vec![0.3, 0.4] };
        let (s, l) = split_increment(std::slice::from_ref(&j), 1.0).unwrap();
        assert_eq!(s, vec![j]);
        assert!(l.is_empty());
        assert!(split_increment(&[], 0.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn split_partitions_like_brute_force(
            sizes in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 2), 0..40),
            threshold in 0.05f64..4.0,
        ) {
            let jumps: Vec<Jump> = sizes.iter().enumerate()
                .map(|(i, s)| Jump { time: i as f64, size: s.clone() })
                .collect();
            let (small, large) = split_increment(&jumps, threshold).unwrap();
            let mut bf_small = Vec::new();
            let mut bf_large = Vec::new();
            for j in &jumps {
                if (j.size[0] * j.size[0] + j.size[1] * j.size[1]).sqrt() <= threshold {
                    bf_small.push(j.clone());
                } else {
                    bf_large.push(j.clone());
                }
            }
            proptest::prop_assert_eq!(small, bf_small);
            proptest::prop_assert_eq!(large, bf_large);
        }
    }
}
