//! Reflection map identities, the distance function ψ with its C² junction,
//! comparison constants, and the one-dimensional Lyapunov drift check.
//!
//! cargo run --release --example coupling_lyapunov

use stable_averaging::coupling::{
    comparison_constant, junction_mismatch, lyapunov_check, psi, reflection_map, PsiParams,
};
use stable_averaging::systems::stable_ou;

fn main() -> stable_averaging::Result<()> {
    let z = reflection_map(&[1.0, 2.0], &[0.0, 0.0], &[0.3, -0.7]);
    println!("phi(0.3, -0.7) across y1 - y2 = (1, 2): ({:.4}, {:.4})", z[0], z[1]);

    let p = PsiParams::with_default_c2(3.0, 1.0)?;
    println!("psi: A = {:.3e}, B = {:.4}, junction mismatch {:?}", p.a(), p.b(), junction_mismatch(&p));
    for r in [0.1, 1.0, 2.0, 2.5] {
        println!("  psi({r}) = {:.6e}", psi(&p, r)?);
    }
    for power in [1.0, 1.25, 2.0] {
        let c = comparison_constant(&p, power, 5.0, 10_000)?;
        println!("r^{power} <= {:.4} psi(r) on (0, 5], tightest at r = {:.3}", c.c, c.argmax);
    }

    let sys = stable_ou(1.0, 1.0, 1.5);
    let pairs: Vec<(f64, f64)> = (0..20).map(|k| (0.3 * k as f64 - 2.0, 0.5 - 0.17 * k as f64)).collect();
    let report = lyapunov_check(&sys, &[0.0], &pairs, &p, 1.0 / p.c1, 1e-12)?;
    for t in report.terms.iter().step_by(4) {
        println!("  r = {:.3}: drift {:+.4e}, jump {:+.4e}, psi {:.4e}", t.r, t.drift, t.jump, t.psi);
    }
    println!("Lyapunov rate beta = {:.4}, tail violations {}", report.beta, report.tail_violations);
    Ok(())
}
