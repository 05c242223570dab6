//! Angular histogram of Az/|Az| for uniform z on the circle, tested by χ²
//! against the density given by the immersion Jacobian.
//!
//! cargo run --release --example pushforward_density -- [samples]

use stable_averaging::replica_rng;
use stable_averaging::sphere_geometry::checks::{pushforward_chi_square, random_conditioned_matrix};

fn main() -> stable_averaging::Result<()> {
    let samples: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10_000_000);
    let mut rng = replica_rng(2, 0);
    for trial in 0..3 {
        let a = random_conditioned_matrix(2, 10.0, &mut rng);
        let chi = pushforward_chi_square(&a, samples, 360, &mut rng)?;
        println!(
            "matrix {trial}: cond <= 10, chi2 = {:.1} on {} dof, p = {:.3}",
            chi.statistic, chi.dof, chi.p_value
        );
    }
    Ok(())
}
