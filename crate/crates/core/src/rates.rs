//! ε-sweeps comparing the slow component with the averaged equation, log-log
//! order fits, and the theoretical exponents they are compared against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::replicas::{collect_replicas, run_replicas};
use crate::rng::{derive_seed, replica_rng};
use crate::sde::{
    AveragedFn, AveragedStepper, IntegratorConfig, SlowFastStepper, SlowFastSystem, time_steps,
};
use crate::stable_noise::{IncrementSampler, StableSpec};
use crate::stats::{spearman, weighted_line_fit, RunningStats};

fn check_exponent_range(v: f64, alpha1: f64, alpha2: f64) -> Result<()> {
    for a in [alpha1, alpha2] {
        if !(a > 1.0 && a < 2.0) {
            return Err(Error::Parameter(format!("stability indices must lie in (1, 2), got {a}")));
        }
    }
    let lower = (alpha1 - alpha2).max(0.0);
    if !(v > lower && v <= alpha1) {
        return Err(Error::Parameter(format!("v = {v} outside ({lower}, {alpha1}]")));
    }
    Ok(())
}

/// Strong exponents for the `p`-th moment of the sup-distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongOrder {
    /// Order in ε of `E sup|X^ε − X̄|^p`.
    pub moment_order: f64,
    /// `moment_order / p`.
    pub path_order: f64,
    /// `p(1 − 1/α₂)`, reached whenever `v ≥ 1`.
    pub collapsed: Option<f64>,
}

pub fn theoretical_strong_order(p: f64, v: f64, alpha1: f64, alpha2: f64) -> Result<StrongOrder> {
    check_exponent_range(v, alpha1, alpha2)?;
    if !(p >= 1.0 && p < alpha1.min(alpha2)) {
        return Err(Error::Parameter(format!("need 1 <= p < min(alpha1, alpha2), got {p}")));
    }
    let first = p * (v / alpha2).min(1.0 - 1f64.max(alpha1 - v) / alpha2);
    let second = p * (1.0 - (1.0 - 1f64.min(v)) / alpha2);
    let moment_order = first.min(second);
    Ok(StrongOrder {
        moment_order,
        path_order: moment_order / p,
        collapsed: (v >= 1.0).then(|| p * (1.0 - 1.0 / alpha2)),
    })
}

pub fn theoretical_weak_order(v: f64, alpha1: f64, alpha2: f64) -> Result<f64> {
    check_exponent_range(v, alpha1, alpha2)?;
    Ok((v / alpha2).min(1.0 - (alpha1 - v) / alpha2))
}

/// One ε cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub epsilon: f64,
    pub error: f64,
    pub stderr: f64,
    pub n_replicas: usize,
}

/// Weighted least squares of `log error` on `log ε`; each point is weighted
/// by the inverse variance of its log error, `(error/stderr)²`.
pub fn fit_loglog(rows: &[RateRow]) -> Result<(f64, f64)> {
    if rows.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 rows, got {}", rows.len())));
    }
    if let Some(r) = rows.iter().find(|r| !(r.error > 0.0 && r.epsilon > 0.0)) {
        return Err(Error::Fit(format!("non-positive error {} at epsilon {}", r.error, r.epsilon)));
    }
    let x: Vec<f64> = rows.iter().map(|r| r.epsilon.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.error.ln()).collect();
    let w: Vec<f64> = rows
        .iter()
        .map(|r| {
            let rel = (r.stderr / r.error).max(1e-12);
            1.0 / (rel * rel)
        })
        .collect();
    let fit = weighted_line_fit(&x, &y, &w)?;
    Ok((fit.slope, fit.slope_stderr))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum DtRule {
    /// `dt = fraction·ε`.
    FractionOfEpsilon(f64),
    Fixed(f64),
}

impl Default for DtRule {
    fn default() -> Self {
        DtRule::FractionOfEpsilon(0.05)
    }
}

impl DtRule {
    pub fn dt(&self, epsilon: f64) -> f64 {
        match *self {
            DtRule::FractionOfEpsilon(f) => f * epsilon,
            DtRule::Fixed(dt) => dt,
        }
    }
}

/// `{2⁻², …, 2⁻⁷}`.
pub fn default_epsilons() -> Vec<f64> {
    (2..=7).map(|k| 2f64.powi(-k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub t_end: f64,
    /// Moment of the strong error.
    pub p: f64,
    pub epsilons: Vec<f64>,
    pub dt_rule: DtRule,
    pub replicas: usize,
    pub seed: u64,
    /// Weak sweep: drive the averaged path with the slow-fast `L¹` stream.
    pub common_noise: bool,
    /// Strong sweep: repeat the smallest ε with half the step.
    pub bias_check: bool,
    pub integrator: IntegratorConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            x0: vec![0.0],
            y0: vec![0.0],
            t_end: 1.0,
            p: 1.0,
            epsilons: default_epsilons(),
            dt_rule: DtRule::default(),
            replicas: 2000,
            seed: 0,
            common_noise: true,
            bias_check: false,
            integrator: IntegratorConfig::default(),
        }
    }
}

impl SweepConfig {
    fn validate(&self, system: &SlowFastSystem) -> Result<()> {
        system.validate()?;
        let e = &self.epsilons;
        if e.len() < 4 {
            return Err(Error::Precondition(format!("epsilon grid needs at least 4 points, got {}", e.len())));
        }
        if e.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) || e.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Precondition("epsilon grid must be strictly decreasing in (0, 1]".into()));
        }
        let ratio = e[1] / e[0];
        if e.windows(2).any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-6) {
            return Err(Error::Precondition("epsilon grid must be geometric".into()));
        }
        if self.x0.len() != system.d1 || self.y0.len() != system.d2 {
            return Err(Error::Parameter("initial state has wrong dimension".into()));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::Parameter(format!("horizon must be positive, got {}", self.t_end)));
        }
        if self.replicas < 2 {
            return Err(Error::Parameter("at least 2 replicas are needed".into()));
        }
        Ok(())
    }
}

/// Companion pathwise errors recorded by the weak sweep under common noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathwiseRow {
    pub epsilon: f64,
    /// `E|X^ε_T − X̄_T|`.
    pub terminal: f64,
    pub terminal_stderr: f64,
    /// `E max_grid |X^ε_t − X̄_t|`.
    pub sup: f64,
    pub sup_stderr: f64,
}

/// Outcome of the dt-halving check at the smallest ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasCheck {
    pub epsilon: f64,
    pub error_half_dt: f64,
    pub stderr_half_dt: f64,
    pub shift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Strong,
    Weak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub kind: SweepKind,
    pub rows: Vec<RateRow>,
    /// Absent when the fit is impossible, e.g. when every error vanishes.
    pub fitted_slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub theoretical_slope: f64,
    /// Spearman correlation of error with ε.
    pub monotonicity: f64,
    pub pathwise: Vec<PathwiseRow>,
    pub bias_check: Option<BiasCheck>,
    pub clipped_steps: u64,
}

impl RateTable {
    fn assemble(kind: SweepKind, rows: Vec<RateRow>, theoretical_slope: f64) -> Self {
        let (fitted_slope, slope_stderr) = match fit_loglog(&rows) {
            Ok((s, se)) => (Some(s), Some(se)),
            Err(_) => (None, None),
        };
        let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
        let err: Vec<f64> = rows.iter().map(|r| r.error).collect();
        RateTable {
            kind,
            monotonicity: spearman(&eps, &err),
            rows,
            fitted_slope,
            slope_stderr,
            theoretical_slope,
            pathwise: Vec::new(),
            bias_check: None,
            clipped_steps: 0,
        }
    }
}

struct CellOutput {
    values: Vec<f64>,
    clipped: u64,
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Per-replica outputs of one ε cell: `(sup distance^p, terminal distance,
/// X^ε_T, X̄_T)` flattened as `[sup, terminal, x_eps.., x_bar..]`.
#[allow(clippy::too_many_arguments)]
fn run_cell(
    system: &SlowFastSystem,
    b_bar: AveragedFn<'_>,
    delta1_bar: AveragedFn<'_>,
    cfg: &SweepConfig,
    epsilon: f64,
    dt: f64,
    cell_seed: u64,
    common_noise: bool,
) -> Result<Vec<CellOutput>> {
    let s1 = StableSpec::new(system.alpha1, system.d1, 1.0)?;
    let s2 = StableSpec::new(system.alpha2, system.d2, 1.0)?;
    s1.validate_for_simulation()?;
    s2.validate_for_simulation()?;
    let (n, h) = time_steps(cfg.t_end, dt)?;
    let guard = crate::sde::stability_limit(system, epsilon);
    if h > epsilon * (1.0 + 1e-12) || (cfg.integrator.stability_guard && h > guard * (1.0 + 1e-9)) {
        return Err(Error::Config(format!("dt = {h} too large for epsilon = {epsilon} (limit {guard})")));
    }
    let l1 = IncrementSampler::new(s1, h)?;
    let l2 = IncrementSampler::new(s2, h)?;
    let d1 = system.d1;
    let results = run_replicas(cfg.replicas, |r| -> Result<CellOutput> {
        let mut rng = replica_rng(cell_seed, r as u64);
        let mut own = replica_rng(derive_seed(cell_seed, u64::MAX), r as u64);
        let mut fast = SlowFastStepper::new(system, h, epsilon, cfg.integrator.drift_cap);
        let mut avg = AveragedStepper::new(d1, b_bar, delta1_bar, h, cfg.integrator.drift_cap);
        let (mut x, mut y, mut xb) = (cfg.x0.clone(), cfg.y0.clone(), cfg.x0.clone());
        let mut dl1 = vec![0.0; d1];
        let mut dl1_bar = vec![0.0; d1];
        let mut dl2 = vec![0.0; system.d2];
        let mut sup: f64 = 0.0;
        for k in 0..n {
            let t = k as f64 * h;
            l1.fill(&mut rng, &mut dl1);
            l2.fill(&mut rng, &mut dl2);
            fast.advance(t, &mut x, &mut y, &dl1, &dl2);
            if common_noise {
                avg.advance(t, &mut xb, &dl1);
            } else {
                l1.fill(&mut own, &mut dl1_bar);
                avg.advance(t, &mut xb, &dl1_bar);
            }
            if !(x.iter().chain(&y).chain(&xb).all(|v| v.is_finite())) {
                return Err(Error::Divergence { step: k + 1 });
            }
            sup = sup.max(norm_diff(&x, &xb));
        }
        let mut values = vec![sup.powf(cfg.p), norm_diff(&x, &xb)];
        values.extend_from_slice(&x);
        values.extend_from_slice(&xb);
        Ok(CellOutput { values, clipped: fast.clipped + avg.clipped })
    });
    collect_replicas(results)
}

fn column(cells: &[CellOutput], j: usize) -> RunningStats {
    cells.iter().map(|c| c.values[j]).collect()
}

/// Strong error `E max_grid |X^ε − X̄|^p` over the ε grid, with `X^ε` and `X̄`
/// driven by the same `L¹` stream. Requires `δ₁` to depend on time only.
pub fn strong_error_sweep(
    system: &SlowFastSystem,
    b_bar: AveragedFn<'_>,
    delta1_bar: AveragedFn<'_>,
    cfg: &SweepConfig,
) -> Result<RateTable> {
    if !system.delta1.is_time_only() {
        return Err(Error::Config(
            "strong rates need a slow noise coefficient δ₁(t) of time only; state dependence \
             cannot be dealt with Lipschitz condition under the shared-noise coupling"
                .into(),
        ));
    }
    cfg.validate(system)?;
    let theory = theoretical_strong_order(cfg.p, system.regularity.v, system.alpha1, system.alpha2)?;
    let mut rows = Vec::with_capacity(cfg.epsilons.len());
    let mut clipped = 0;
    for (i, &eps) in cfg.epsilons.iter().enumerate() {
        let cells = run_cell(system, b_bar, delta1_bar, cfg, eps, cfg.dt_rule.dt(eps), derive_seed(cfg.seed, i as u64), true)?;
        clipped += cells.iter().map(|c| c.clipped).sum::<u64>();
        let s = column(&cells, 0);
        rows.push(RateRow { epsilon: eps, error: s.mean(), stderr: s.stderr(), n_replicas: cfg.replicas });
    }
    let mut table = RateTable::assemble(SweepKind::Strong, rows, theory.moment_order);
    if cfg.bias_check {
        let last = cfg.epsilons.len() - 1;
        let eps = cfg.epsilons[last];
        let cells =
            run_cell(system, b_bar, delta1_bar, cfg, eps, 0.5 * cfg.dt_rule.dt(eps), derive_seed(cfg.seed, last as u64), true)?;
        let s = column(&cells, 0);
        table.bias_check = Some(BiasCheck {
            epsilon: eps,
            error_half_dt: s.mean(),
            stderr_half_dt: s.stderr(),
            shift: s.mean() - table.rows[last].error,
        });
    }
    table.clipped_steps = clipped;
    Ok(table)
}

/// Weak error `|E φ(X^ε_T) − E φ(X̄_T)|` over the ε grid. With common noise
/// the standard error comes from paired differences and the pathwise errors
/// are recorded alongside.
pub fn weak_error_sweep(
    system: &SlowFastSystem,
    phi: &(dyn Fn(&[f64]) -> f64 + Sync),
    b_bar: AveragedFn<'_>,
    delta1_bar: AveragedFn<'_>,
    cfg: &SweepConfig,
) -> Result<RateTable> {
    cfg.validate(system)?;
    let theory = theoretical_weak_order(system.regularity.v, system.alpha1, system.alpha2)?;
    let d1 = system.d1;
    let mut rows = Vec::with_capacity(cfg.epsilons.len());
    let mut pathwise = Vec::new();
    let mut clipped = 0;
    for (i, &eps) in cfg.epsilons.iter().enumerate() {
        let cells = run_cell(
            system,
            b_bar,
            delta1_bar,
            cfg,
            eps,
            cfg.dt_rule.dt(eps),
            derive_seed(cfg.seed, i as u64),
            cfg.common_noise,
        )?;
        clipped += cells.iter().map(|c| c.clipped).sum::<u64>();
        let phis: Vec<(f64, f64)> =
            cells.iter().map(|c| (phi(&c.values[2..2 + d1]), phi(&c.values[2 + d1..2 + 2 * d1]))).collect();
        let a: RunningStats = phis.iter().map(|p| p.0).collect();
        let b: RunningStats = phis.iter().map(|p| p.1).collect();
        let stderr = if cfg.common_noise {
            phis.iter().map(|p| p.0 - p.1).collect::<RunningStats>().stderr()
        } else {
            a.stderr().hypot(b.stderr())
        };
        rows.push(RateRow { epsilon: eps, error: (a.mean() - b.mean()).abs(), stderr, n_replicas: cfg.replicas });
        if cfg.common_noise {
            let sup = column(&cells, 0);
            let term = column(&cells, 1);
            let sup_p: RunningStats = if cfg.p == 1.0 { sup } else { cells.iter().map(|c| c.values[0].powf(1.0 / cfg.p)).collect() };
            pathwise.push(PathwiseRow {
                epsilon: eps,
                terminal: term.mean(),
                terminal_stderr: term.stderr(),
                sup: sup_p.mean(),
                sup_stderr: sup_p.stderr(),
            });
        }
    }
    let mut table = RateTable::assemble(SweepKind::Weak, rows, theory);
    table.pathwise = pathwise;
    table.clipped_steps = clipped;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{d1, d1_averaged_drift, d2};
    use std::sync::Arc;

    fn one(_: f64, _: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }

    #[test]
    fn strong_exponents() {
        let o = theoretical_strong_order(1.0, 1.0, 1.5, 1.5).unwrap();
        assert!((o.moment_order - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(o.collapsed, Some(o.moment_order));
        for k in 0..=20 {
            let v = 1.0 + 0.5 * k as f64 / 20.0;
            let o = theoretical_strong_order(1.2, v, 1.5, 1.7).unwrap();
            assert!((o.moment_order - 1.2 * (1.0 - 1.0 / 1.7)).abs() < 1e-12);
        }
        assert!(theoretical_strong_order(1.0, 0.1, 1.8, 1.5).is_err());
        assert!(theoretical_strong_order(1.0, 0.4, 1.8, 1.5).is_ok());
        assert!(theoretical_strong_order(1.6, 1.0, 1.5, 1.5).is_err());
    }

    #[test]
    fn weak_exponents() {
        assert!((theoretical_weak_order(1.5, 1.5, 1.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((theoretical_weak_order(1.0, 1.5, 1.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let lower = 1.8 - 1.5;
        let small = theoretical_weak_order(lower + 1e-9, 1.8, 1.5).unwrap();
        assert!(small > 0.0 && small < 1e-8);
        assert!(theoretical_weak_order(lower, 1.8, 1.5).is_err());
    }

    #[test]
    fn weak_dominates_strong_on_grid() {
        for a1 in [1.1f64, 1.4, 1.7, 1.9] {
            for a2 in [1.1, 1.5, 1.9] {
                let lower = (a1 - a2).max(0.0);
                for k in 1..=40 {
                    let v = lower + (a1 - lower) * k as f64 / 40.0;
                    let w = theoretical_weak_order(v, a1, a2).unwrap();
                    let s = theoretical_strong_order(1.0, v, a1, a2).unwrap();
                    assert!(w >= s.moment_order - 1e-12, "{a1} {a2} {v}");
                }
            }
        }
    }

    #[test]
    fn loglog_fits() {
        let exact: Vec<RateRow> = default_epsilons()
            .into_iter()
            .map(|e| RateRow { epsilon: e, error: e.sqrt(), stderr: 0.01 * e.sqrt(), n_replicas: 1 })
            .collect();
        let (s, _) = fit_loglog(&exact).unwrap();
        assert!((s - 0.5).abs() < 1e-12);
        let mut outlier = exact.clone();
        outlier[2].error *= 5.0;
        outlier[2].stderr = 1e3 * outlier[2].error;
        let (s, _) = fit_loglog(&outlier).unwrap();
        assert!((s - 0.5).abs() < 0.01);
        assert!(matches!(fit_loglog(&exact[..2]), Err(Error::Fit(_))));
    }

    #[test]
    fn grid_preconditions() {
        let sys = d1(1.5);
        let b = d1_averaged_drift(1.5);
        let cfg = SweepConfig { epsilons: vec![0.25, 0.125], replicas: 10, ..Default::default() };
        assert!(matches!(strong_error_sweep(&sys, &b, &one, &cfg), Err(Error::Precondition(_))));
        let cfg = SweepConfig { epsilons: vec![0.25, 0.125, 0.1, 0.05], replicas: 10, ..Default::default() };
        assert!(matches!(strong_error_sweep(&sys, &b, &one, &cfg), Err(Error::Precondition(_))));
    }

    #[test]
    fn state_dependent_slow_noise_rejected() {
        let sys = d2(1.5);
        let b = d1_averaged_drift(1.5);
        let err = strong_error_sweep(&sys, &b, &one, &SweepConfig { replicas: 10, ..Default::default() }).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("cannot be dealt with Lipschitz condition")));
    }

    #[test]
    fn y_independent_drift_has_zero_strong_error() {
        let mut sys = d1(1.5);
        sys.b = Arc::new(|_, x: &[f64], _, out: &mut [f64]| out[0] = -x[0]);
        let b = |_: f64, x: &[f64], out: &mut [f64]| out[0] = -x[0];
        let cfg = SweepConfig { replicas: 50, ..Default::default() };
        let table = strong_error_sweep(&sys, &b, &one, &cfg).unwrap();
        assert!(table.rows.iter().all(|r| r.error == 0.0));
        assert_eq!(table.fitted_slope, None);
    }

    #[test]
    fn constant_phi_has_zero_weak_error() {
        let sys = d2(1.5);
        let b = d1_averaged_drift(1.5);
        let cfg = SweepConfig { replicas: 20, ..Default::default() };
        let table = weak_error_sweep(&sys, &|_| 3.0, &b, &one, &cfg).unwrap();
        assert!(table.rows.iter().all(|r| r.error == 0.0));
        assert_eq!(table.pathwise.len(), 6);
    }

    #[test]
    fn strong_sweep_is_reproducible_and_monotone() {
        let sys = d1(1.5);
        let b = d1_averaged_drift(1.5);
        let cfg = SweepConfig { replicas: 300, seed: 17, bias_check: true, ..Default::default() };
        let t1 = strong_error_sweep(&sys, &b, &one, &cfg).unwrap();
        let t2 = strong_error_sweep(&sys, &b, &one, &cfg).unwrap();
        assert_eq!(t1, t2);
        assert!(t1.monotonicity > 0.8, "{t1:?}");
        assert!(t1.bias_check.is_some());
    }
}
