//! Slow-fast paths of D1 at several ε, and the time-change law linking one
//! fast step at scale ε to a frozen step of length dt/ε.
//!
//! cargo run --release --example simulate_paths

use stable_averaging::replica_rng;
use stable_averaging::sde::{simulate_frozen, simulate_slow_fast, step_slow_fast, IntegratorConfig, SlowFastState};
use stable_averaging::stats::{ks_two_sample, RunningStats};
use stable_averaging::systems::{d1, stable_ou};

fn main() -> stable_averaging::Result<()> {
    let sys = d1(1.5);
    let cfg = IntegratorConfig::default();
    for eps in [0.25, 0.05, 0.01] {
        let dt = eps / 20.0;
        let finals = (0..500)
            .map(|r| {
                let mut rng = replica_rng(4, r);
                simulate_slow_fast(&sys, &[0.0], &[0.0], 1.0, dt, eps, &mut rng, &cfg).map(|p| p.final_x().unwrap()[0])
            })
            .collect::<stable_averaging::Result<RunningStats>>()?;
        println!("eps = {eps:<5}: E X_1 = {:.4} ± {:.4}", finals.mean(), finals.stderr());
    }

    let ou = stable_ou(1.0, 1.0, 1.5);
    let (dt, eps) = (0.001, 0.1);
    let start = SlowFastState { t: 0.0, x: vec![0.0], y: vec![0.0] };
    let fast = (0..5000)
        .map(|r| step_slow_fast(&ou, &start, dt, eps, &mut replica_rng(5, r)).map(|s| s.y[0]))
        .collect::<stable_averaging::Result<Vec<_>>>()?;
    let frozen = (0..5000)
        .map(|r| {
            simulate_frozen(&ou, &[0.0], &[0.0], dt / eps, dt / eps, &mut replica_rng(6, r), &cfg)
                .map(|p| p.final_y().unwrap()[0])
        })
        .collect::<stable_averaging::Result<Vec<_>>>()?;
    let ks = ks_two_sample(&fast, &frozen);
    println!("time change: KS statistic {:.4}, p = {:.3}", ks.statistic, ks.p_value);
    Ok(())
}
