//! Exact symmetric and isotropic α-stable increments: empirical
//! characteristic functions against e^{−dt|ξ|^α}.
//!
//! cargo run --release --example stable_sampling -- [samples]

use stable_averaging::replica_rng;
use stable_averaging::stable_noise::{sample_isotropic_stable, StableSpec};
use stable_averaging::stats::empirical_char_fn;

fn main() -> stable_averaging::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50_000);
    let dt = 0.5;
    let mut rng = replica_rng(1, 0);
    println!("{:>5} {:>4} {:>6} {:>10} {:>10} {:>8}", "alpha", "dim", "|xi|", "empirical", "exact", "z");
    for alpha in [1.2, 1.5, 1.8, 2.0] {
        for dim in [1, 2, 3] {
            let spec = StableSpec::new(alpha, dim, 1.0)?;
            let samples = (0..n).map(|_| sample_isotropic_stable(&spec, dt, &mut rng)).collect::<Result<Vec<_>, _>>()?;
            for norm in [0.5, 1.0, 2.0] {
                let mut xi = vec![0.0; dim];
                xi[0] = norm;
                let est = empirical_char_fn(samples.iter().map(Vec::as_slice), &xi);
                let exact = spec.char_fn(norm, dt);
                let z = (est.re - exact) / est.re_stderr;
                println!("{alpha:>5.2} {dim:>4} {norm:>6.2} {:>10.5} {exact:>10.5} {z:>8.2}", est.re);
            }
        }
    }
    Ok(())
}
