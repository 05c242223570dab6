//! Jacobian of the sphere immersion induced by a jump matrix: closed form
//! against a finite-difference tangent determinant, plus the spherical
//! density H and its ellipticity bounds.
//!
//! cargo run --release --example sphere_geometry

use nalgebra::DMatrix;
use stable_averaging::replica_rng;
use stable_averaging::sphere_geometry::checks::{jacobian_trial, uniform_on_sphere};
use stable_averaging::sphere_geometry::{jacobian_det, spherical_density_h, JumpMatrix};

fn main() -> stable_averaging::Result<()> {
    let mut rng = replica_rng(3, 0);
    for dim in [2, 3, 5] {
        let mut worst: f64 = 0.0;
        let mut in_bounds = 0;
        for _ in 0..200 {
            let t = jacobian_trial(dim, 10.0, &mut rng)?;
            worst = worst.max(t.rel_error);
            in_bounds += usize::from(t.within_bounds);
        }
        println!("d = {dim}: max rel error {worst:.2e}, Jacobian bounds hold in {in_bounds}/200 trials");
    }

    let a = JumpMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.0, 1.0]))?;
    let (lo, hi) = a.density_bounds(1.5);
    println!("A = [[2, 0.5], [0, 1]]: c_l = {:.4}, c_u = {:.4}, H in [{lo:.4}, {hi:.4}]", a.c_l(), a.c_u());
    for _ in 0..5 {
        let z = uniform_on_sphere(2, &mut rng);
        println!(
            "  z = ({:+.3}, {:+.3}): J_F = {:.4}, H = {:.4}",
            z.coords()[0],
            z.coords()[1],
            jacobian_det(&a, &z)?,
            spherical_density_h(&a, &z, 1.5)?
        );
    }
    Ok(())
}
