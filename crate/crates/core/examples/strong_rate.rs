//! Strong error sweep on the desk system D1 against its closed-form averaged
//! drift, with the fitted log-log slope compared to the theoretical order.
//!
//! cargo run --release --example strong_rate -- [replicas] [seed]

use stable_averaging::rates::{strong_error_sweep, SweepConfig};
use stable_averaging::systems::{d1, d1_averaged_drift};

fn main() -> stable_averaging::Result<()> {
    let mut args = std::env::args().skip(1);
    let replicas = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);
    let alpha = 1.5;
    let system = d1(alpha);
    let b_bar = d1_averaged_drift(alpha);
    let unit = |_: f64, _: &[f64], out: &mut [f64]| out[0] = 1.0;
    let cfg = SweepConfig { replicas, seed, bias_check: true, ..Default::default() };
    let table = strong_error_sweep(&system, &b_bar, &unit, &cfg)?;
    println!("{:>10} {:>12} {:>12}", "epsilon", "error", "stderr");
    for r in &table.rows {
        println!("{:>10.6} {:>12.6} {:>12.6}", r.epsilon, r.error, r.stderr);
    }
    println!(
        "fitted slope {:.4} ± {:.4}, theoretical {:.4}",
        table.fitted_slope.unwrap_or(f64::NAN),
        table.slope_stderr.unwrap_or(f64::NAN),
        table.theoretical_slope
    );
    if let Some(b) = table.bias_check {
        println!("half-dt check at epsilon {}: error {:.6} (shift {:+.2e})", b.epsilon, b.error_half_dt, b.shift);
    }
    Ok(())
}
