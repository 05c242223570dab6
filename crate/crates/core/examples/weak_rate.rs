//! Weak error sweep on the desk system D2 (multiplicative slow noise) with
//! φ = tanh, alongside the pathwise errors of the same coupled runs.
//!
//! cargo run --release --example weak_rate -- [replicas] [seed]

use stable_averaging::rates::{weak_error_sweep, SweepConfig};
use stable_averaging::systems::{d1_averaged_drift, d2, d2_averaged_noise};

fn main() -> stable_averaging::Result<()> {
    let mut args = std::env::args().skip(1);
    let replicas = args.next().and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);
    let alpha = 1.5;
    let system = d2(alpha);
    let b_bar = d1_averaged_drift(alpha);
    let delta_bar = d2_averaged_noise(alpha);
    let cfg = SweepConfig { replicas, seed, x0: vec![0.5], ..Default::default() };
    let table = weak_error_sweep(&system, &|x| x[0].tanh(), &b_bar, &delta_bar, &cfg)?;
    println!("{:>10} {:>12} {:>12} {:>12}", "epsilon", "weak", "stderr", "E sup|diff|");
    for (r, p) in table.rows.iter().zip(&table.pathwise) {
        println!("{:>10.6} {:>12.6} {:>12.6} {:>12.6}", r.epsilon, r.error, r.stderr, p.sup);
    }
    println!(
        "fitted slope {:.4} ± {:.4}, theoretical {:.4}",
        table.fitted_slope.unwrap_or(f64::NAN),
        table.slope_stderr.unwrap_or(f64::NAN),
        table.theoretical_slope
    );
    Ok(())
}
