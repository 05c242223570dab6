use serde::{Deserialize, Serialize};

use super::{frozen_grid, frozen_spec, invariant_average, DecayFit, ErgodicConfig, Observable, TransientConfig};
use crate::error::{Error, Result};
use crate::replicas::{collect_replicas, run_replicas};
use crate::rng::replica_rng;
use crate::sde::{FrozenStepper, NoiseStream, SlowFastSystem, StableStream};
use crate::stats::RunningStats;

/// Monte Carlo value of `u(y) = ∫₀^T [E g(Y_s^y) − ḡ] ds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectorValue {
    pub value: f64,
    pub stderr: f64,
    pub truncation_t: f64,
    /// Bound on the neglected tail `∫_T^∞`, from a decay fit; infinite without one.
    pub residual_bound: f64,
    pub g_bar: f64,
    pub g_bar_stderr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrectorConfig {
    /// Truncation time; defaults to `10/beta_hat` of the supplied decay fit.
    pub t_max: Option<f64>,
    pub transient: TransientConfig,
    /// Budget for estimating `ḡ`.
    pub reference: ErgodicConfig,
}

fn truncation(cfg: &CorrectorConfig, decay: Option<&DecayFit>) -> Result<(f64, f64)> {
    let t_max = match (cfg.t_max, decay) {
        (Some(t), _) => t,
        (None, Some(fit)) if fit.beta_hat > 0.0 => 10.0 / fit.beta_hat,
        _ => {
            return Err(Error::Precondition(
                "corrector truncation needs t_max or a decay fit with positive rate".into(),
            ))
        }
    };
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::Parameter(format!("t_max must be positive, got {t_max}")));
    }
    let bound = match decay {
        Some(fit) if fit.beta_hat > 0.0 => fit.c_hat / fit.beta_hat * (-fit.beta_hat * t_max).exp(),
        _ => f64::INFINITY,
    };
    Ok((t_max, bound))
}

/// Corrector values at several starting points, all driven by the same noise
/// in each replica so that differences between starting points are smooth.
pub fn corrector_profile(
    system: &SlowFastSystem,
    x: &[f64],
    starts: &[Vec<f64>],
    g: Observable<'_>,
    decay: Option<&DecayFit>,
    cfg: &CorrectorConfig,
) -> Result<Vec<CorrectorValue>> {
    let (t_max, residual_bound) = truncation(cfg, decay)?;
    if starts.iter().any(|y| y.len() != system.d2) {
        return Err(Error::Parameter("starting point has wrong dimension".into()));
    }
    let spec = frozen_spec(system)?;
    let tc = &cfg.transient;
    let (n, h) = frozen_grid(system, t_max, tc.dt, &tc.integrator)?;
    let ref_est = invariant_average(system, x, g, &cfg.reference)?;
    let g_bar = ref_est.value;

    let results = run_replicas(tc.replicas, |r| -> Result<Vec<f64>> {
        let mut rng = replica_rng(tc.seed, r as u64);
        let mut stream = StableStream::new(spec, h, &mut rng)?;
        let mut stepper = FrozenStepper::new(system, h, tc.integrator.drift_cap);
        let mut ys = starts.to_vec();
        let mut prev: Vec<f64> = ys.iter().map(|y| g(y) - g_bar).collect();
        let mut integral = vec![0.0; ys.len()];
        let mut dl = vec![0.0; system.d2];
        for k in 0..n {
            stream.next_increment(&mut dl)?;
            for (j, y) in ys.iter_mut().enumerate() {
                stepper.advance(x, y, &dl);
                if !y.iter().all(|v| v.is_finite()) {
                    return Err(Error::Divergence { step: k + 1 });
                }
                let cur = g(y) - g_bar;
                integral[j] += 0.5 * h * (prev[j] + cur);
                prev[j] = cur;
            }
        }
        Ok(integral)
    });
    let rows = collect_replicas(results)?;
    let t = n as f64 * h;
    Ok((0..starts.len())
        .map(|j| {
            let s: RunningStats = rows.iter().map(|r| r[j]).collect();
            CorrectorValue {
                value: s.mean(),
                stderr: s.stderr().hypot(t * ref_est.stderr),
                truncation_t: t,
                residual_bound,
                g_bar,
                g_bar_stderr: ref_est.stderr,
            }
        })
        .collect())
}

/// Evaluate the corrector at a single point.
pub fn corrector_eval(
    system: &SlowFastSystem,
    x: &[f64],
    y: &[f64],
    g: Observable<'_>,
    decay: Option<&DecayFit>,
    cfg: &CorrectorConfig,
) -> Result<CorrectorValue> {
    Ok(corrector_profile(system, x, &[y.to_vec()], g, decay, cfg)?[0])
}

/// Central finite differences `(u(y+h) − u(y−h))/2h` on a one-dimensional
/// fast space, with common random numbers across all points.
pub fn corrector_gradient_1d(
    system: &SlowFastSystem,
    x: &[f64],
    ys: &[f64],
    step: f64,
    g: Observable<'_>,
    decay: Option<&DecayFit>,
    cfg: &CorrectorConfig,
) -> Result<Vec<(f64, f64)>> {
    if system.d2 != 1 {
        return Err(Error::Precondition("gradient probe is defined for a one-dimensional fast space".into()));
    }
    if !(step > 0.0) {
        return Err(Error::Parameter(format!("step must be positive, got {step}")));
    }
    let starts: Vec<Vec<f64>> = ys.iter().flat_map(|&y| [vec![y - step], vec![y + step]]).collect();
    let vals = corrector_profile(system, x, &starts, g, decay, cfg)?;
    Ok(ys.iter().zip(vals.chunks(2)).map(|(&y, c)| (y, (c[1].value - c[0].value) / (2.0 * step))).collect())
}
