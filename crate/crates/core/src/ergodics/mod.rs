//! Invariant-measure estimators for the frozen equation
//! `dY = f(x,Y)dt + δ₂(x,Y)dL²` and everything built on them: averaged
//! coefficients, decay-rate fits, synchronous-coupling contraction and the
//! corrector integral.

mod corrector;
mod decay;
mod table;

pub use corrector::*;
pub use decay::*;
pub use table::*;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::replicas::{collect_replicas, run_replicas};
use crate::rng::replica_rng;
use crate::sde::{stability_limit, time_steps, FrozenStepper, IntegratorConfig, NoiseStream, SlowFastSystem, StableStream};
use crate::stable_noise::StableSpec;
use crate::stats::RunningStats;

/// Scalar observable of the fast variable.
pub type Observable<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// Vector observable `y ↦ out`.
pub type VectorObservable<'a> = &'a (dyn Fn(&[f64], &mut [f64]) + Sync);

/// Monte Carlo estimate of `∫ g dρˣ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgodicEstimate {
    pub value: f64,
    pub stderr: f64,
    pub burn_in: f64,
    pub horizon: f64,
    pub replicas: usize,
}

/// Budget for time-average estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErgodicConfig {
    pub horizon: f64,
    /// Defaults to `5/beta_hint`, or 20% of the horizon without a hint.
    pub burn_in: Option<f64>,
    pub beta_hint: Option<f64>,
    pub dt: f64,
    pub replicas: usize,
    pub seed: u64,
    /// Starting point of every replica; zeros when absent.
    pub y0: Option<Vec<f64>>,
    pub integrator: IntegratorConfig,
}

impl Default for ErgodicConfig {
    fn default() -> Self {
        Self {
            horizon: 50.0,
            burn_in: None,
            beta_hint: None,
            dt: 0.01,
            replicas: 200,
            seed: 0,
            y0: None,
            integrator: IntegratorConfig::default(),
        }
    }
}

impl ErgodicConfig {
    pub fn resolved_burn_in(&self) -> f64 {
        match (self.burn_in, self.beta_hint) {
            (Some(b), _) => b,
            (None, Some(beta)) if beta > 0.0 => (5.0 / beta).min(0.5 * self.horizon),
            _ => 0.2 * self.horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let burn_in = self.resolved_burn_in();
        if !(burn_in > 0.0 && self.horizon > burn_in && self.horizon.is_finite()) {
            return Err(Error::Precondition(format!(
                "need horizon > burn_in > 0, got horizon {} and burn_in {burn_in}",
                self.horizon
            )));
        }
        if self.replicas < 2 {
            return Err(Error::Parameter("at least 2 replicas are needed for a standard error".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Parameter(format!("dt must be positive, got {}", self.dt)));
        }
        Ok(())
    }

    fn start(&self, d2: usize) -> Result<Vec<f64>> {
        match &self.y0 {
            Some(y) if y.len() != d2 => Err(Error::Parameter(format!("y0 has length {}, expected {d2}", y.len()))),
            Some(y) => Ok(y.clone()),
            None => Ok(vec![0.0; d2]),
        }
    }
}

pub(crate) fn frozen_spec(system: &SlowFastSystem) -> Result<StableSpec> {
    system.validate()?;
    let spec = StableSpec::new(system.alpha2, system.d2, 1.0)?;
    spec.validate_for_simulation()?;
    Ok(spec)
}

pub(crate) fn frozen_grid(
    system: &SlowFastSystem,
    t_end: f64,
    dt: f64,
    integrator: &IntegratorConfig,
) -> Result<(usize, f64)> {
    let (n, h) = time_steps(t_end, dt)?;
    if integrator.stability_guard && h > stability_limit(system, 1.0) * (1.0 + 1e-9) {
        return Err(Error::Config(format!("dt = {h} above the frozen stability limit {}", stability_limit(system, 1.0))));
    }
    Ok((n, h))
}

/// Time averages of the `m` components of `g` over `[burn_in, horizon]`,
/// one estimate per component, replicas combined by across-replica variance.
pub fn invariant_average_components(
    system: &SlowFastSystem,
    x: &[f64],
    m: usize,
    g: VectorObservable<'_>,
    cfg: &ErgodicConfig,
) -> Result<Vec<ErgodicEstimate>> {
    cfg.validate()?;
    let spec = frozen_spec(system)?;
    if x.len() != system.d1 {
        return Err(Error::Parameter(format!("frozen parameter has length {}, expected {}", x.len(), system.d1)));
    }
    let y0 = cfg.start(system.d2)?;
    let burn_in = cfg.resolved_burn_in();
    let (n, h) = frozen_grid(system, cfg.horizon, cfg.dt, &cfg.integrator)?;
    let skip = ((burn_in / h).round() as usize).min(n - 1);

    let per_replica = run_replicas(cfg.replicas, |r| -> Result<Vec<f64>> {
        let mut rng = replica_rng(cfg.seed, r as u64);
        let mut stream = StableStream::new(spec, h, &mut rng)?;
        let mut stepper = FrozenStepper::new(system, h, cfg.integrator.drift_cap);
        let mut y = y0.clone();
        let mut dl = vec![0.0; system.d2];
        let mut buf = vec![0.0; m];
        let mut acc: Vec<RunningStats> = vec![RunningStats::new(); m];
        for k in 0..n {
            stream.next_increment(&mut dl)?;
            stepper.advance(x, &mut y, &dl);
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::Divergence { step: k + 1 });
            }
            if k + 1 > skip {
                g(&y, &mut buf);
                acc.iter_mut().zip(&buf).for_each(|(a, v)| a.push(*v));
            }
        }
        Ok(acc.iter().map(RunningStats::mean).collect())
    });
    let per_replica = collect_replicas(per_replica)?;
    Ok((0..m)
        .map(|c| {
            let s: RunningStats = per_replica.iter().map(|v| v[c]).collect();
            ErgodicEstimate {
                value: s.mean(),
                stderr: s.stderr(),
                burn_in: skip as f64 * h,
                horizon: n as f64 * h,
                replicas: cfg.replicas,
            }
        })
        .collect())
}

/// Estimate `ρˣ(g)` by time-averaging frozen paths.
pub fn invariant_average(
    system: &SlowFastSystem,
    x: &[f64],
    g: Observable<'_>,
    cfg: &ErgodicConfig,
) -> Result<ErgodicEstimate> {
    let wrapped = |y: &[f64], out: &mut [f64]| out[0] = g(y);
    Ok(invariant_average_components(system, x, 1, &wrapped, cfg)?[0])
}

/// `(residual, stderr)` of the invariant average of an observable that is
/// supposed to be centred already; the residual should vanish within noise.
pub fn check_centering(
    system: &SlowFastSystem,
    x: &[f64],
    g: Observable<'_>,
    cfg: &ErgodicConfig,
) -> Result<(f64, f64)> {
    let est = invariant_average(system, x, g, cfg)?;
    Ok((est.value, est.stderr))
}

/// `b̄(t, x)` estimated directly (no memoization).
pub fn averaged_drift(system: &SlowFastSystem, t: f64, x: &[f64], cfg: &ErgodicConfig) -> Result<Vec<f64>> {
    let g = |y: &[f64], out: &mut [f64]| (system.b)(t, x, y, out);
    Ok(invariant_average_components(system, x, system.d1, &g, cfg)?.iter().map(|e| e.value).collect())
}

/// `δ̄₁(t, x)` as a row-major `d₁×d₁` matrix. Exact when `δ₁` depends on
/// time only.
pub fn averaged_noise(system: &SlowFastSystem, t: f64, x: &[f64], cfg: &ErgodicConfig) -> Result<Vec<f64>> {
    let d = system.d1;
    if system.delta1.is_time_only() {
        let mut out = vec![0.0; d * d];
        system.delta1.eval(t, x, &vec![0.0; system.d2], &mut out);
        return Ok(out);
    }
    let g = |y: &[f64], out: &mut [f64]| system.delta1.eval(t, x, y, out);
    Ok(invariant_average_components(system, x, d * d, &g, cfg)?.iter().map(|e| e.value).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{d1, d2, stable_ou, stable_ou_mean_cos};

    fn quick() -> ErgodicConfig {
        ErgodicConfig { horizon: 50.0, replicas: 200, seed: 11, ..Default::default() }
    }

    #[test]
    fn constants_are_fixed_points() {
        let sys = stable_ou(1.0, 1.0, 1.5);
        for kappa in [1.0, -0.3, 0.1, 1e6] {
            let est = invariant_average(&sys, &[0.0], &|_| kappa, &quick()).unwrap();
            assert_eq!(est.value, kappa);
            assert_eq!(est.stderr, 0.0);
        }
    }

    #[test]
    fn stable_ou_cos_and_sin() {
        let sys = stable_ou(1.0, 1.0, 1.5);
        let cos = invariant_average(&sys, &[0.0], &|y| y[0].cos(), &quick()).unwrap();
        let oracle = stable_ou_mean_cos(1.0, 1.0, 1.5);
        assert!((cos.value - oracle).abs() <= 3.0 * cos.stderr + 1e-3, "{cos:?} vs {oracle}");
        let sin = invariant_average(&sys, &[0.0], &|y| y[0].sin(), &quick()).unwrap();
        assert!(sin.value.abs() <= 3.0 * sin.stderr, "{sin:?}");
    }

    #[test]
    fn linearity_within_noise() {
        let sys = stable_ou(1.0, 1.0, 1.5);
        let cfg = quick();
        let a = invariant_average(&sys, &[0.0], &|y| y[0].cos(), &cfg).unwrap();
        let b = invariant_average(&sys, &[0.0], &|y| y[0].tanh().powi(2), &cfg).unwrap();
        let c = invariant_average(&sys, &[0.0], &|y| 2.0 * y[0].cos() - 3.0 * y[0].tanh().powi(2), &cfg).unwrap();
        // Same seed, so the combination is exact up to rounding.
        assert!((c.value - (2.0 * a.value - 3.0 * b.value)).abs() < 1e-10);
    }

    #[test]
    fn averaged_coefficients_of_desk_systems() {
        let cfg = quick();
        let sys = d1(1.5);
        let shift = stable_ou_mean_cos(1.0, 1.0, 1.5);
        for x in [-0.5, 0.7] {
            let b = averaged_drift(&sys, 0.0, &[x], &cfg).unwrap();
            assert!((b[0] - (-x + shift)).abs() < 0.03, "{b:?}");
            assert_eq!(averaged_noise(&sys, 0.0, &[x], &cfg).unwrap(), vec![1.0]);
        }
        let sys = d2(1.5);
        let x = 0.8f64;
        let dbar = averaged_noise(&sys, 0.0, &[x], &cfg).unwrap();
        assert!((dbar[0] - (1.0 + 0.2 * x.sin() * x.cos() * shift)).abs() < 0.01, "{dbar:?}");
    }

    #[test]
    fn y_independent_drift_is_exact() {
        let mut sys = d1(1.5);
        sys.b = std::sync::Arc::new(|_, x: &[f64], _, out: &mut [f64]| out[0] = -0.3 * x[0]);
        let b = averaged_drift(&sys, 0.0, &[0.7], &quick()).unwrap();
        assert_eq!(b[0], -0.3 * 0.7);
    }

    #[test]
    fn centering() {
        let sys = stable_ou(1.0, 1.0, 1.5);
        let cfg = quick();
        let g_bar = stable_ou_mean_cos(1.0, 1.0, 1.5);
        let (res, se) = check_centering(&sys, &[0.0], &|y| y[0].cos() - g_bar, &cfg).unwrap();
        assert!(res.abs() <= 3.0 * se + 1e-3, "{res} ± {se}");
        let (res, _) = check_centering(&sys, &[0.0], &|_| 1.0, &cfg).unwrap();
        assert_eq!(res, 1.0);
    }

    #[test]
    fn bad_budgets_rejected() {
        let sys = stable_ou(1.0, 1.0, 1.5);
        let cfg = ErgodicConfig { horizon: 1.0, burn_in: Some(2.0), ..quick() };
        assert!(matches!(invariant_average(&sys, &[0.0], &|_| 1.0, &cfg), Err(Error::Precondition(_))));
        assert_eq!(ErgodicConfig { beta_hint: Some(1.0), ..quick() }.resolved_burn_in(), 5.0);
        assert_eq!(quick().resolved_burn_in(), 10.0);
    }
}
