//! Invariant average of cos under the stable Ornstein-Uhlenbeck frozen
//! equation, its closed form, and the fitted exponential relaxation rate.
//!
//! cargo run --release --example frozen_ergodics

use stable_averaging::ergodics::{ergodic_decay_rate, invariant_average, ErgodicConfig, TransientConfig};
use stable_averaging::systems::{euler_ou_mean_cos, stable_ou, stable_ou_mean_cos};

fn main() -> stable_averaging::Result<()> {
    let alpha = 1.5;
    let sys = stable_ou(1.0, 1.0, alpha);
    let cfg = ErgodicConfig { horizon: 50.0, replicas: 200, seed: 1, ..Default::default() };
    let est = invariant_average(&sys, &[0.0], &|y| y[0].cos(), &cfg)?;
    println!(
        "E cos Y: {:.5} ± {:.5} (burn-in {}, horizon {}); exact {:.5}, Euler chain {:.5}",
        est.value,
        est.stderr,
        est.burn_in,
        est.horizon,
        stable_ou_mean_cos(1.0, 1.0, alpha),
        euler_ou_mean_cos(cfg.dt, alpha)
    );

    let grid: Vec<f64> = (1..=8).map(|k| 0.25 * k as f64).collect();
    let tcfg = TransientConfig { replicas: 4000, seed: 2, ..Default::default() };
    let fit = ergodic_decay_rate(&sys, &[0.0], &|y| y[0].tanh(), &[2.0], &grid, (0.0, 0.0), &tcfg)?;
    println!("{:>6} {:>10} {:>10}", "t", "gap", "stderr");
    for p in &fit.points {
        println!("{:>6.2} {:>10.5} {:>10.5}{}", p.t, p.gap, p.stderr, if p.used { "" } else { "  (unused)" });
    }
    println!("beta = {:.3} ± {:.3}, C = {:.3}, R² = {:.4}", fit.beta_hat, fit.beta_stderr, fit.c_hat, fit.fit_r2);
    Ok(())
}
