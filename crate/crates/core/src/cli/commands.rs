//! Subcommand bodies. Each writes its artifacts and returns the one-line
//! summary printed by the runner.

use rand::Rng;
use serde::Serialize;

use super::config::{AveragingMethod, ExperimentConfig, RatesParams, SystemSpec};
use super::output::{digest, Cell, OutputDir, Provenance};
use crate::coupling::{
    comparison_constant, junction_mismatch, lyapunov_check, psi_d1, psi_tail_margin, reflection_residual,
};
use crate::ergodics::{
    corrector_eval, corrector_gradient_1d, ergodic_decay_rate, invariant_average, AveragedTable,
};
use crate::error::{Error, Result};
use crate::rates::{strong_error_sweep, weak_error_sweep, RateTable};
use crate::replicas::run_replicas;
use crate::rng::{derive_seed, replica_rng};
use crate::sde::{simulate_frozen, simulate_slow_fast, IntegratorConfig, SlowFastSystem};
use crate::sphere_geometry::checks::jacobian_trial;
use crate::systems;

pub struct Context {
    pub prov: Provenance,
    pub seed: u64,
    pub replicas: Option<usize>,
    pub dim: Option<usize>,
    pub trials: Option<usize>,
}

fn system_or(cfg: &ExperimentConfig, default: &str) -> (SystemSpec, Result<SlowFastSystem>) {
    let spec = cfg.system.clone().unwrap_or_else(|| SystemSpec::builtin(default));
    let sys = spec.build();
    (spec, sys)
}

fn scalar_observable(e: &super::config::Expr, x: f64) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
    move |y: &[f64]| e.eval(0.0, x, y[0])
}

pub fn simulate(cfg: &ExperimentConfig, ctx: &Context, out: &mut OutputDir) -> Result<String> {
    let (_, sys) = system_or(cfg, "D1");
    let sys = sys?;
    let p = &cfg.simulate;
    let replicas = ctx.replicas.unwrap_or(p.replicas).max(1);
    let icfg = IntegratorConfig { record_stride: p.record_stride, ..Default::default() };
    let paths = run_replicas(replicas, |r| {
        let mut rng = replica_rng(ctx.seed, r as u64);
        simulate_slow_fast(&sys, &p.x0, &p.y0, p.t_end, p.dt, p.epsilon, &mut rng, &icfg)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut header = vec!["replica".to_string(), "t".to_string()];
    header.extend((0..sys.d1).map(|i| format!("x{i}")));
    header.extend((0..sys.d2).map(|i| format!("y{i}")));
    let mut rows = Vec::new();
    for (r, path) in paths.iter().enumerate() {
        for k in 0..path.len() {
            let mut row: Vec<Cell> = vec![r.into(), path.times[k].into()];
            row.extend(path.x_path[k].iter().map(|&v| v.into()));
            row.extend(path.y_path[k].iter().map(|&v| v.into()));
            rows.push(row);
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("results.csv", &ctx.prov, &header, &rows)?;
    let clipped: u64 = paths.iter().map(|p| p.clipped_steps).sum();
    let mean_x: f64 = paths.iter().map(|p| p.final_x().map_or(0.0, |x| x[0])).sum::<f64>() / replicas as f64;
    #[derive(Serialize)]
    struct Summary {
        replicas: usize,
        mean_final_x0: f64,
        clipped_steps: u64,
    }
    out.json("summary.json", &ctx.prov, &Summary { replicas, mean_final_x0: mean_x, clipped_steps: clipped })?;
    Ok(format!("simulate: {replicas} path(s), mean final x0 = {mean_x:.6}, clipped steps = {clipped}"))
}

pub fn frozen(cfg: &ExperimentConfig, ctx: &Context, out: &mut OutputDir) -> Result<String> {
    let (_, sys) = system_or(cfg, "OU");
    let sys = sys?;
    let p = &cfg.frozen;
    let replicas = ctx.replicas.unwrap_or(p.replicas).max(1);
    let icfg = IntegratorConfig { record_stride: p.record_stride, ..Default::default() };
    let paths = run_replicas(replicas, |r| {
        let mut rng = replica_rng(ctx.seed, r as u64);
        simulate_frozen(&sys, &p.x, &p.y0, p.t_end, p.dt, &mut rng, &icfg)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut header = vec!["replica".to_string(), "t".to_string()];
    header.extend((0..sys.d2).map(|i| format!("y{i}")));
    let mut rows = Vec::new();
    for (r, path) in paths.iter().enumerate() {
        for k in 0..path.len() {
            let mut row: Vec<Cell> = vec![r.into(), path.times[k].into()];
            row.extend(path.y_path[k].iter().map(|&v| v.into()));
            rows.push(row);
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("results.csv", &ctx.prov, &header, &rows)?;
    #[derive(Serialize)]
    struct Summary {
        replicas: usize,
        clipped_steps: u64,
    }
    let clipped = paths.iter().map(|p| p.clipped_steps).sum();
    out.json("summary.json", &ctx.prov, &Summary { replicas, clipped_steps: clipped })?;
    Ok(format!("frozen: {replicas} path(s) written"))
}

pub fn ergodic(cfg: &ExperimentConfig, ctx: &Context, out: &mut OutputDir) -> Result<String> {
    let (spec, sys) = system_or(cfg, "OU");
    let sys = sys?;
    let p = &cfg.ergodic;
    let mut ecfg = p.ergodic.clone();
    ecfg.seed = derive_seed(ctx.seed, 1);
    let mut tcfg = p.transient.clone();
    tcfg.seed = derive_seed(ctx.seed, 2);
    if let Some(r) = ctx.replicas {
        ecfg.replicas = r;
        tcfg.replicas = r;
    }
    let x0 = p.x.first().copied().unwrap_or(0.0);
    let g = scalar_observable(&p.observable, x0);
    let est = invariant_average(&sys, &p.x, &g, &ecfg)?;
    let decay_expr = p.decay_observable.as_ref().unwrap_or(&p.observable);
    let h = scalar_observable(decay_expr, x0);
    let g_bar = match p.g_bar {
        Some(v) => (v, 0.0),
        None if p.decay_observable.is_none() => (est.value, est.stderr),
        None => {
            let e = invariant_average(&sys, &p.x, &h, &ecfg)?;
            (e.value, e.stderr)
        }
    };
    let fit = ergodic_decay_rate(&sys, &p.x, &h, &p.y0, &p.time_grid, g_bar, &tcfg)?;
    let rows: Vec<Vec<Cell>> =
        fit.points.iter().map(|q| vec![q.t.into(), q.gap.into(), q.stderr.into(), q.used.into()]).collect();
    out.csv("results.csv", &ctx.prov, &["t", "gap", "stderr", "used"], &rows)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        invariant_average: f64,
        invariant_stderr: f64,
        burn_in: f64,
        horizon: f64,
        replicas: usize,
        beta_hat: f64,
        beta_stderr: f64,
        c_hat: f64,
        fit_r2: f64,
        system_digest: String,
        system: &'a SystemSpec,
    }
    out.json(
        "summary.json",
        &ctx.prov,
        &Summary {
            invariant_average: est.value,
            invariant_stderr: est.stderr,
            burn_in: est.burn_in,
            horizon: est.horizon,
            replicas: est.replicas,
            beta_hat: fit.beta_hat,
            beta_stderr: fit.beta_stderr,
            c_hat: fit.c_hat,
            fit_r2: fit.fit_r2,
            system_digest: digest(&spec)?,
            system: &spec,
        },
    )?;
    Ok(format!(
        "ergodic: average {:.6} ± {:.6}, decay rate {:.4} ± {:.4}",
        est.value, est.stderr, fit.beta_hat, fit.beta_stderr
    ))
}

pub fn corrector(cfg: &ExperimentConfig, ctx: &Context, out: &mut OutputDir) -> Result<String> {
    let (spec, sys) = system_or(cfg, "OU");
    let sys = sys?;
    let p = &cfg.corrector;
    let mut ccfg = p.corrector.clone();
    ccfg.transient.seed = derive_seed(ctx.seed, 2);
    ccfg.reference.seed = derive_seed(ctx.seed, 1);
    if let Some(r) = ctx.replicas {
        ccfg.transient.replicas = r;
    }
    let g = scalar_observable(&p.observable, p.x.first().copied().unwrap_or(0.0));
    let u = corrector_eval(&sys, &p.x, &p.y, &g, None, &ccfg)?;
    let rows: Vec<Vec<Cell>> = vec![vec![p.y[0].into(), u.value.into(), u.stderr.into()]];
    out.csv("results.csv", &ctx.prov, &["y", "value", "stderr"], &rows)?;
    let mut max_gradient = None;
    if !p.gradient_points.is_empty() {
        let grad = corrector_gradient_1d(&sys, &p.x, &p.gradient_points, p.gradient_step, &g, None, &ccfg)?;
        let rows: Vec<Vec<Cell>> = grad.iter().map(|&(y, d)| vec![y.into(), d.into()]).collect();
        out.csv("gradient.csv", &ctx.prov, &["y", "du_dy"], &rows)?;
        max_gradient = Some(grad.iter().map(|g| g.1.abs()).fold(0.0, f64::max));
    }
    #[derive(Serialize)]
    struct Summary {
        value: f64,
        stderr: f64,
        truncation_t: f64,
        residual_bound: Option<f64>,
        g_bar: f64,
        g_bar_stderr: f64,
        max_abs_gradient: Option<f64>,
        system_digest: String,
    }
    out.json(
        "summary.json",
        &ctx.prov,
        &Summary {
            value: u.value,
            stderr: u.stderr,
            truncation_t: u.truncation_t,
            residual_bound: u.residual_bound.is_finite().then_some(u.residual_bound),
            g_bar: u.g_bar,
            g_bar_stderr: u.g_bar_stderr,
            max_abs_gradient: max_gradient,
            system_digest: digest(&spec)?,
        },
    )?;
    Ok(format!("corrector: u = {:.6} ± {:.6} (T = {})", u.value, u.stderr, u.truncation_t))
}

type Coefficient = Box<dyn Fn(f64, &[f64], &mut [f64]) + Sync + Send>;

fn averaged_coefficients(spec: &SystemSpec, sys: &SlowFastSystem, p: &RatesParams, seed: u64) -> Result<(Coefficient, Coefficient, &'static str)> {
    let oracle = spec.oracle_name();
    let use_oracle = match p.averaging.method {
        AveragingMethod::Oracle if oracle.is_none() => {
            return Err(Error::Config("no closed-form averaged coefficients for this system".into()))
        }
        AveragingMethod::Oracle => true,
        AveragingMethod::Auto => oracle.is_some(),
        AveragingMethod::Table => false,
    };
    if use_oracle {
        let (name, alpha) = oracle.expect("checked");
        let b: Coefficient = Box::new(systems::d1_averaged_drift(alpha));
        let d: Coefficient = if name == "D2" {
            Box::new(systems::d2_averaged_noise(alpha))
        } else {
            Box::new(|_, _: &[f64], out: &mut [f64]| out[0] = 1.0)
        };
        return Ok((b, d, "oracle"));
    }
    let mut ecfg = p.averaging.ergodic.clone();
    ecfg.seed = derive_seed(seed, 3);
    let table = AveragedTable::new(sys, p.averaging.grid.clone(), ecfg)?;
    let interp = std::sync::Arc::new(table.interpolant()?);
    let i2 = std::sync::Arc::clone(&interp);
    Ok((Box::new(move |t, x, out| interp.drift(t, x, out)), Box::new(move |t, x, out| i2.noise(t, x, out)), "table"))
}

#[derive(Serialize)]
struct RatesSummary<'a> {
    fitted_slope: Option<f64>,
    slope_stderr: Option<f64>,
    theoretical_slope: f64,
    system_digest: String,
    monotonicity: f64,
    averaging: &'a str,
    table: &'a RateTable,
}

fn write_rates(
    table: &RateTable,
    spec: &SystemSpec,
    averaging: &str,
    ctx: &Context,
    out: &mut OutputDir,
) -> Result<()> {
    let rows: Vec<Vec<Cell>> = table
        .rows
        .iter()
        .map(|r| vec![r.epsilon.into(), r.error.into(), r.stderr.into(), r.n_replicas.into()])
        .collect();
    out.csv("results.csv", &ctx.prov, &["epsilon", "error", "stderr", "n_replicas"], &rows)?;
    if !table.pathwise.is_empty() {
        let rows: Vec<Vec<Cell>> = table
            .pathwise
            .iter()
            .map(|r| vec![r.epsilon.into(), r.terminal.into(), r.terminal_stderr.into(), r.sup.into(), r.sup_stderr.into()])
            .collect();
        out.csv("pathwise.csv", &ctx.prov, &["epsilon", "terminal", "terminal_stderr", "sup", "sup_stderr"], &rows)?;
    }
    out.json(
        "summary.json",
        &ctx.prov,
        &RatesSummary {
            fitted_slope: table.fitted_slope,
            slope_stderr: table.slope_stderr,
            theoretical_slope: table.theoretical_slope,
            system_digest: digest(spec)?,
            monotonicity: table.monotonicity,
            averaging,
            table,
        },
    )
}

fn slope_line(kind: &str, table: &RateTable) -> String {
    match (table.fitted_slope, table.slope_stderr) {
        (Some(s), Some(se)) => format!("{kind}: fitted slope {s:.4} ± {se:.4} (theory {:.4})", table.theoretical_slope),
        _ => format!("{kind}: no fit (errors vanish), theory {:.4}", table.theoretical_slope),
    }
}

pub fn rates_strong(cfg: &ExperimentConfig, ctx: &Context, out: &mut OutputDir) -> Result<String> {
    let (spec, sys) = system_or(cfg, "D1");
    let sys = sys?;
    let p = &cfg.rates_strong;
    let mut sweep = p.sweep.clone();
    sweep.seed = ctx.seed;
    if let Some(r) = ctx.replicas {
        sweep.replicas = r;
    }
    let (b, d, how) = averaged_coefficients(&spec, &sys, p, ctx.seed)?;
    let table = strong_error_sweep(&sys, &*b, &*d, &sweep)?;
    write_rates(&table, &spec, how, ctx, out)?;
    Ok(slope_line("rates-strong", &table))
}

pub fn rates_weak(cfg: &ExperimentConfig, ctx: &Context, out: &mut OutputDir) -> Result<String> {
    let (spec, sys) = system_or(cfg, "D2");
    let sys = sys?;
    let p = &cfg.rates_weak;
    let mut sweep = p.sweep.clone();
    sweep.seed = ctx.seed;
    if let Some(r) = ctx.replicas {
        sweep.replicas = r;
    }
    let (b, d, how) = averaged_coefficients(&spec, &sys, p, ctx.seed)?;
    let phi = |x: &[f64]| p.phi.eval(0.0, x[0], 0.0);
    let table = weak_error_sweep(&sys, &phi, &*b, &*d, &sweep)?;
    write_rates(&table, &spec, how, ctx, out)?;
    Ok(slope_line("rates-weak", &table))
}

pub fn geometry_check(cfg: &ExperimentConfig, ctx: &Context, out: &mut OutputDir) -> Result<String> {
    let p = &cfg.geometry_check;
    let dims = ctx.dim.map_or_else(|| p.dims.clone(), |d| vec![d]);
    let trials = ctx.trials.unwrap_or(p.trials);
    let mut rows = Vec::new();
    let mut failures = 0;
    for &dim in &dims {
        if dim < 2 {
            return Err(Error::Parameter(format!("geometry check needs dim >= 2, got {dim}")));
        }
        let mut rng = replica_rng(ctx.seed, dim as u64);
        for trial in 0..trials {
            let t = jacobian_trial(dim, p.max_condition, &mut rng)?;
            let pass = t.rel_error <= p.rel_tol && t.within_bounds;
            failures += usize::from(!pass);
            rows.push(vec![
                dim.into(),
                trial.into(),
                t.closed_form.into(),
                t.finite_difference.into(),
                t.rel_error.into(),
                t.lower_bound.into(),
                t.upper_bound.into(),
                pass.into(),
            ]);
        }
    }
    out.csv(
        "results.csv",
        &ctx.prov,
        &["dim", "trial", "jacobian", "finite_difference", "rel_error", "lower_bound", "upper_bound", "pass"],
        &rows,
    )?;
    #[derive(Serialize)]
    struct Summary {
        dims: Vec<usize>,
        trials: usize,
        failures: usize,
    }
    out.json("summary.json", &ctx.prov, &Summary { dims: dims.clone(), trials, failures })?;
    let total = rows.len();
    if failures > 0 {
        return Err(Error::Numeric(format!("{failures} of {total} Jacobian checks failed")));
    }
    Ok(format!("geometry-check: all {total} Jacobian checks pass (dims {dims:?})"))
}

pub fn coupling_check(cfg: &ExperimentConfig, ctx: &Context, out: &mut OutputDir) -> Result<String> {
    let (spec, sys) = system_or(cfg, "OU");
    let sys = sys?;
    let p = &cfg.coupling_check;
    p.psi.validate()?;
    let a = p.a.unwrap_or(1.0 / p.psi.c1);
    let mut rng = replica_rng(ctx.seed, 0);
    let mut reflection: f64 = 0.0;
    for d in [1, 2, 3, 5] {
        for _ in 0..2500 {
            let mut v = || (0..d).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>();
            let (y1, y2, z) = (v(), v(), v());
            reflection = reflection.max(reflection_residual(&y1, &y2, &z));
        }
    }
    let junction = junction_mismatch(&p.psi).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let n = p.grid_points.max(1);
    let l0 = p.psi.l0;
    let mut tail_ok = true;
    let mut monotone = true;
    for k in 0..=n {
        let r = 2.0 * l0 + 5.0 * l0 * k as f64 / n as f64;
        tail_ok &= psi_tail_margin(&p.psi, r) > 0.0;
        monotone &= psi_d1(&p.psi, 7.0 * l0 * k as f64 / n as f64)? > 0.0;
    }
    let comparison = p
        .comparison_powers
        .iter()
        .map(|&q| comparison_constant(&p.psi, q, p.comparison_r_max, n).map(|c| (q, c.c)))
        .collect::<Result<Vec<_>>>()?;
    let report = lyapunov_check(&sys, &p.x, &p.pairs, &p.psi, a, p.quad_tol)?;
    let rows: Vec<Vec<Cell>> = p
        .pairs
        .iter()
        .zip(&report.terms)
        .map(|(&(y1, y2), t)| {
            vec![y1.into(), y2.into(), t.r.into(), t.drift.into(), t.jump.into(), t.total.into(), t.psi.into()]
        })
        .collect();
    out.csv("results.csv", &ctx.prov, &["y1", "y2", "r", "drift", "jump", "total", "psi"], &rows)?;
    #[derive(Serialize)]
    struct Summary {
        reflection_residual: f64,
        junction_mismatch: f64,
        tail_margin_positive: bool,
        psi_increasing: bool,
        comparison_constants: Vec<(f64, f64)>,
        lyapunov_beta: f64,
        tail_violations: usize,
        a: f64,
        system_digest: String,
    }
    let summary = Summary {
        reflection_residual: reflection,
        junction_mismatch: junction,
        tail_margin_positive: tail_ok,
        psi_increasing: monotone,
        comparison_constants: comparison,
        lyapunov_beta: report.beta,
        tail_violations: report.tail_violations,
        a,
        system_digest: digest(&spec)?,
    };
    out.json("summary.json", &ctx.prov, &summary)?;
    let ok = reflection < 1e-12 && junction < 1e-12 && tail_ok && monotone && report.beta > 0.0 && report.tail_violations == 0;
    if !ok {
        return Err(Error::Numeric("coupling checks failed; see summary.json".into()));
    }
    Ok(format!("coupling-check: all identities hold, Lyapunov beta = {:.4}", report.beta))
}
