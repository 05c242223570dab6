//! Truncated corrector u(y) = ∫ (E g(Y_s^y) − ḡ) ds for the stable OU process
//! with g = cos, its quadrature oracle and the finite-difference gradient.
//!
//! cargo run --release --example corrector

use stable_averaging::ergodics::{corrector_eval, corrector_gradient_1d, CorrectorConfig, ErgodicConfig, TransientConfig};
use stable_averaging::quadrature::integrate;
use stable_averaging::systems::{stable_ou, stable_ou_conditional_cos, stable_ou_mean_cos};

fn main() -> stable_averaging::Result<()> {
    let sys = stable_ou(1.0, 1.0, 1.5);
    let g = |y: &[f64]| y[0].cos();
    let cfg = CorrectorConfig {
        t_max: Some(10.0),
        transient: TransientConfig { replicas: 2000, seed: 1, ..Default::default() },
        reference: ErgodicConfig { horizon: 100.0, replicas: 200, seed: 2, ..Default::default() },
    };
    let m = stable_ou_mean_cos(1.0, 1.0, 1.5);
    for y in [0.0, 1.0, 2.5] {
        let u = corrector_eval(&sys, &[0.0], &[y], &g, None, &cfg)?;
        let oracle = integrate(&|s| stable_ou_conditional_cos(y, s, 1.0, 1.0, 1.5) - m, 0.0, 60.0, 1e-12)?;
        println!("u({y}) = {:.4} ± {:.4}, quadrature {oracle:.4}", u.value, u.stderr);
    }
    let ys: Vec<f64> = (0..=6).map(|k| -3.0 + k as f64).collect();
    for (y, d) in corrector_gradient_1d(&sys, &[0.0], &ys, 0.1, &g, None, &cfg)? {
        println!("du/dy({y:+.1}) = {d:+.4}");
    }
    Ok(())
}
