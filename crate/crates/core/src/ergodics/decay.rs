use serde::{Deserialize, Serialize};

use super::{frozen_grid, frozen_spec, Observable};
use crate::error::{Error, Result};
use crate::replicas::{collect_replicas, run_replicas};
use crate::rng::replica_rng;
use crate::sde::{FrozenStepper, IntegratorConfig, NoiseStream, SlowFastSystem, StableStream};
use crate::stats::{weighted_line_fit, RunningStats};

/// Monte Carlo budget for transient (non-stationary) frozen experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransientConfig {
    pub dt: f64,
    pub replicas: usize,
    pub seed: u64,
    pub integrator: IntegratorConfig,
}

impl Default for TransientConfig {
    fn default() -> Self {
        Self { dt: 0.01, replicas: 2000, seed: 0, integrator: IntegratorConfig::default() }
    }
}

/// One point of a decay curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub t: f64,
    pub gap: f64,
    pub stderr: f64,
    /// Whether the point entered the fit.
    pub used: bool,
}

/// Exponential fit `|gap(t)| ≈ c_hat·e^{−beta_hat·t}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub beta_hat: f64,
    pub beta_stderr: f64,
    pub c_hat: f64,
    pub fit_r2: f64,
    pub points: Vec<DecayPoint>,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 4 {
        return Err(Error::Precondition(format!("time grid needs at least 4 points, got {}", grid.len())));
    }
    if grid[0] < 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("time grid must be nonnegative and strictly increasing".into()));
    }
    Ok(())
}

/// Runs `replicas` groups of frozen paths started at `starts`, all paths of a
/// group driven by one shared noise stream. `reduce` maps the group's states
/// at each grid time to a number; result is `[replica][grid index]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn coupled_snapshots(
    system: &SlowFastSystem,
    x: &[f64],
    starts: &[Vec<f64>],
    grid: &[f64],
    cfg: &TransientConfig,
    reduce: &(dyn Fn(&[Vec<f64>]) -> f64 + Sync),
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let spec = frozen_spec(system)?;
    let t_end = *grid.last().expect("grid checked");
    let (n, h) = frozen_grid(system, t_end, cfg.dt, &cfg.integrator)?;
    let marks: Vec<usize> = grid.iter().map(|t| ((t / h).round() as usize).min(n)).collect();
    let times: Vec<f64> = marks.iter().map(|&k| k as f64 * h).collect();
    let results = run_replicas(cfg.replicas, |r| -> Result<Vec<f64>> {
        let mut rng = replica_rng(cfg.seed, r as u64);
        let mut stream = StableStream::new(spec, h, &mut rng)?;
        let mut stepper = FrozenStepper::new(system, h, cfg.integrator.drift_cap);
        let mut ys: Vec<Vec<f64>> = starts.to_vec();
        let mut dl = vec![0.0; system.d2];
        let mut out = Vec::with_capacity(marks.len());
        let mut next = 0;
        for k in 0..=n {
            while next < marks.len() && marks[next] == k {
                out.push(reduce(&ys));
                next += 1;
            }
            if k == n {
                break;
            }
            stream.next_increment(&mut dl)?;
            for y in ys.iter_mut() {
                stepper.advance(x, y, &dl);
                if !y.iter().all(|v| v.is_finite()) {
                    return Err(Error::Divergence { step: k + 1 });
                }
            }
        }
        Ok(out)
    });
    Ok((times, collect_replicas(results)?))
}

fn column_stats(rows: &[Vec<f64>], j: usize) -> RunningStats {
    rows.iter().map(|r| r[j]).collect()
}

fn fit_points(mut points: Vec<DecayPoint>) -> Result<DecayFit> {
    for p in points.iter_mut() {
        p.used = p.gap != 0.0 && p.gap.is_finite() && p.gap.abs() > 3.0 * p.stderr;
    }
    let usable: Vec<&DecayPoint> = points.iter().filter(|p| p.used).collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientSignal { usable: usable.len(), needed: 3 });
    }
    let t: Vec<f64> = usable.iter().map(|p| p.t).collect();
    let y: Vec<f64> = usable.iter().map(|p| p.gap.abs().ln()).collect();
    let w: Vec<f64> = usable
        .iter()
        .map(|p| {
            let rel = (p.stderr / p.gap.abs()).max(1e-12);
            1.0 / (rel * rel)
        })
        .collect();
    let fit = weighted_line_fit(&t, &y, &w)?;
    Ok(DecayFit { beta_hat: -fit.slope, beta_stderr: fit.slope_stderr, c_hat: fit.intercept.exp(), fit_r2: fit.r2, points })
}

/// Fit the decay `|E g(Y_t^{y0}) − ḡ| ≈ C e^{−βt}` over `time_grid`.
///
/// `g_bar` is the invariant average with its standard error, e.g. from
/// [`invariant_average`](super::invariant_average). Grid points whose gap is within 3 standard errors of
/// zero are excluded.
#[allow(clippy::too_many_arguments)]
pub fn ergodic_decay_rate(
    system: &SlowFastSystem,
    x: &[f64],
    g: Observable<'_>,
    y0: &[f64],
    time_grid: &[f64],
    g_bar: (f64, f64),
    cfg: &TransientConfig,
) -> Result<DecayFit> {
    check_grid(time_grid)?;
    if y0.len() != system.d2 {
        return Err(Error::Parameter(format!("y0 has length {}, expected {}", y0.len(), system.d2)));
    }
    let (g_bar, g_bar_se) = g_bar;
    let (times, rows) = coupled_snapshots(system, x, &[y0.to_vec()], time_grid, cfg, &|ys| g(&ys[0]))?;
    let points = times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let s = column_stats(&rows, j);
            DecayPoint { t, gap: s.mean() - g_bar, stderr: s.stderr().hypot(g_bar_se), used: false }
        })
        .collect();
    fit_points(points)
}

/// Synchronous-coupling contraction fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionFit {
    /// Decay rate of `(E|ΔY_t|^p)^{1/p}`.
    pub beta_hat: f64,
    /// The same rate on the `W_p^p` scale, `p·beta_hat`.
    pub beta_moment: f64,
    pub beta_stderr: f64,
    /// Prefactor relative to `|y1 − y2|`.
    pub c_hat: f64,
    pub fit_r2: f64,
    /// `gap` holds `(E|ΔY_t|^p)^{1/p}`.
    pub points: Vec<DecayPoint>,
}

/// Fit `(E|Y_t^{y1} − Y_t^{y2}|^p)^{1/p} ≈ C e^{−βt}|y1 − y2|` with both paths
/// driven by the same noise. Under any coupling this moment bounds `W_p`
/// from above, so the fit certifies contraction without computing `W_p`.
#[allow(clippy::too_many_arguments)]
pub fn wasserstein_contraction(
    system: &SlowFastSystem,
    x: &[f64],
    y1: &[f64],
    y2: &[f64],
    p: f64,
    time_grid: &[f64],
    cfg: &TransientConfig,
) -> Result<ContractionFit> {
    check_grid(time_grid)?;
    if y1.len() != system.d2 || y2.len() != system.d2 {
        return Err(Error::Parameter("starting points have wrong dimension".into()));
    }
    if y1 == y2 {
        return Err(Error::Precondition("y1 and y2 must differ".into()));
    }
    if !(p >= 1.0 && p < system.alpha2) {
        return Err(Error::Precondition(format!("need 1 <= p < alpha2 = {}, got {p}", system.alpha2)));
    }
    let dist0: f64 = y1.iter().zip(y2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let moment = |ys: &[Vec<f64>]| -> f64 {
        ys[0].iter().zip(&ys[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt().powf(p)
    };
    let (times, rows) = coupled_snapshots(system, x, &[y1.to_vec(), y2.to_vec()], time_grid, cfg, &moment)?;
    let points = times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let s = column_stats(&rows, j);
            let m = s.mean();
            let root = m.powf(1.0 / p);
            let se = if m > 0.0 { root * s.stderr() / (p * m) } else { 0.0 };
            DecayPoint { t, gap: root, stderr: se, used: false }
        })
        .collect();
    let fit = fit_points(points)?;
    Ok(ContractionFit {
        beta_hat: fit.beta_hat,
        beta_moment: p * fit.beta_hat,
        beta_stderr: fit.beta_stderr,
        c_hat: fit.c_hat / dist0,
        fit_r2: fit.fit_r2,
        points: fit.points,
    })
}
