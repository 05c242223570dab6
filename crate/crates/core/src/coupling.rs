//! Reflection coupling ingredients: the mirror map `φ`, the `C²` distance
//! function `ψ`, comparison constants and a one-dimensional numerical check of
//! the Lyapunov drift inequality.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::quadrature::integrate;
use crate::sde::SlowFastSystem;
use crate::sphere_geometry::{spherical_density_h, JumpMatrix, SpherePoint};

/// `φ(z) = z − 2⟨u, z⟩u/|u|²` with `u = y1 − y2`; `−z` when `y1 = y2`.
pub fn reflection_map(y1: &[f64], y2: &[f64], z: &[f64]) -> Vec<f64> {
    let u: Vec<f64> = y1.iter().zip(y2).map(|(a, b)| a - b).collect();
    let uu: f64 = u.iter().map(|v| v * v).sum();
    if uu == 0.0 {
        return z.iter().map(|v| -v).collect();
    }
    let k = 2.0 * u.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / uu;
    z.iter().zip(&u).map(|(zi, ui)| zi - k * ui).collect()
}

/// Largest violation of the three reflection identities at `(y1, y2, z)`:
/// involution, isometry, and the parallel/orthogonal split along `y1 − y2`.
pub fn reflection_residual(y1: &[f64], y2: &[f64], z: &[f64]) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let norm = |a: &[f64]| dot(a, a).sqrt();
    let scale = norm(z).max(1.0);
    let fz = reflection_map(y1, y2, z);
    let ffz = reflection_map(y1, y2, &fz);
    let involution = ffz.iter().zip(z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let isometry = (norm(&fz) - norm(z)).abs();
    let u: Vec<f64> = y1.iter().zip(y2).map(|(a, b)| a - b).collect();
    let nu = norm(&u);
    if nu == 0.0 {
        return involution.max(isometry) / scale;
    }
    let diff: Vec<f64> = z.iter().zip(&fz).map(|(a, b)| a - b).collect();
    let sum: Vec<f64> = z.iter().zip(&fz).map(|(a, b)| a + b).collect();
    // |⟨d, u⟩| = |d||u| for parallel vectors.
    let parallel = (dot(&diff, &u).abs() - norm(&diff) * nu).abs() / nu;
    let orthogonal = dot(&sum, &u).abs() / nu;
    involution.max(isometry).max(parallel).max(orthogonal) / scale
}

/// Parameters of `ψ`; `A` and `B` are derived on demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiParams {
    pub c1: f64,
    pub c2: f64,
    pub l0: f64,
}

impl PsiParams {
    pub fn new(c1: f64, c2: f64, l0: f64) -> Result<Self> {
        let p = Self { c1, c2, l0 };
        p.validate()?;
        Ok(p)
    }

    /// `c₂ = 20 c₁`.
    pub fn with_default_c2(c1: f64, l0: f64) -> Result<Self> {
        Self::new(c1, 20.0 * c1, l0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.l0 > 0.0 && self.c2.is_finite() && self.c1.is_finite() && self.l0.is_finite()) {
            return Err(Error::Parameter(format!("c1, c2, L0 must be positive and finite: {self:?}")));
        }
        if self.c2 < 20.0 * self.c1 {
            return Err(Error::Parameter(format!("need c2 >= 20 c1, got c1 = {}, c2 = {}", self.c1, self.c2)));
        }
        Ok(())
    }

    fn junction_decay(&self) -> f64 {
        (-2.0 * self.l0 * self.c1).exp()
    }

    pub fn a(&self) -> f64 {
        self.c1 / self.c2 * self.junction_decay()
    }

    pub fn b(&self) -> f64 {
        -0.5 * (self.c1 + self.c2) * self.c1 * self.junction_decay()
    }
}

fn check_r(r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("ψ is defined for finite r >= 0, got {r}")))
    }
}

/// `ψ(r)`: `1 − e^{−c₁r}` up to `2L₀`, then `Ae^{c₂s} + Bs² + (1 − e^{−2c₁L₀} − A)`
/// with `s = r − 2L₀`.
pub fn psi(p: &PsiParams, r: f64) -> Result<f64> {
    check_r(r)?;
    let s = r - 2.0 * p.l0;
    Ok(if s <= 0.0 {
        -(-p.c1 * r).exp_m1()
    } else {
        p.a() * (p.c2 * s).exp() + p.b() * s * s + (1.0 - p.junction_decay() - p.a())
    })
}

/// `ψ′(r)`.
pub fn psi_d1(p: &PsiParams, r: f64) -> Result<f64> {
    check_r(r)?;
    let s = r - 2.0 * p.l0;
    Ok(if s <= 0.0 { p.c1 * (-p.c1 * r).exp() } else { p.a() * p.c2 * (p.c2 * s).exp() + 2.0 * p.b() * s })
}

/// `ψ″(r)`.
pub fn psi_d2(p: &PsiParams, r: f64) -> Result<f64> {
    check_r(r)?;
    let s = r - 2.0 * p.l0;
    Ok(if s <= 0.0 { -p.c1 * p.c1 * (-p.c1 * r).exp() } else { p.a() * p.c2 * p.c2 * (p.c2 * s).exp() + 2.0 * p.b() })
}

/// `½Ac₂e^{c₂(r−2L₀)} + 2B(r−2L₀)`, the part of `ψ′` beyond half its
/// exponential term on `[2L₀, ∞)`.
pub fn psi_tail_margin(p: &PsiParams, r: f64) -> f64 {
    let s = r - 2.0 * p.l0;
    0.5 * p.a() * p.c2 * (p.c2 * s).exp() + 2.0 * p.b() * s
}

/// Differences of `ψ`, `ψ′`, `ψ″` across the junction `r = 2L₀`, evaluated
/// from the two branch formulas.
pub fn junction_mismatch(p: &PsiParams) -> [f64; 3] {
    let e = p.junction_decay();
    let (a, b) = (p.a(), p.b());
    [
        (1.0 - e) - (a + (1.0 - e - a)),
        p.c1 * e - a * p.c2,
        -p.c1 * p.c1 * e - (a * p.c2 * p.c2 + 2.0 * b),
    ]
}

/// `sup r^p/ψ(r)` over a uniform grid on `(0, r_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConstant {
    pub c: f64,
    pub argmax: f64,
}

pub fn comparison_constant(p: &PsiParams, power: f64, r_max: f64, points: usize) -> Result<ComparisonConstant> {
    ensure(power >= 1.0, || format!("need p >= 1, got {power}"))?;
    ensure(r_max > 0.0 && r_max.is_finite(), || format!("need r_max > 0, got {r_max}"))?;
    ensure(points >= 1, || "grid needs at least one point".into())?;
    let mut best = ComparisonConstant { c: 0.0, argmax: r_max };
    for k in 1..=points {
        let r = r_max * k as f64 / points as f64;
        let ratio = r.powf(power) / psi(p, r)?;
        if ratio > best.c {
            best = ComparisonConstant { c: ratio, argmax: r };
        }
    }
    // Cover the rounding in c·ψ(r) so the inequality holds exactly on the grid.
    best.c *= 1.0 + 4.0 * f64::EPSILON;
    Ok(best)
}

/// Terms of the Lyapunov bound at one pair `(y1, y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovTerms {
    pub r: f64,
    pub drift: f64,
    pub jump: f64,
    pub total: f64,
    pub psi: f64,
}

/// Drift term `ψ′(r)⟨f(y1)−f(y2), y1−y2⟩/r` plus, for `r ≤ L₀`, the reflected
/// small-jump term `2ψ″((1+2a)r)∫_{|z|≤ar} z²H̃(z)|z|^{−1−α}dz` on a
/// one-dimensional fast space. Larger jumps are synchronous and cancel.
pub fn lyapunov_rhs(
    system: &SlowFastSystem,
    x: &[f64],
    y1: f64,
    y2: f64,
    params: &PsiParams,
    a: f64,
    tol: f64,
) -> Result<LyapunovTerms> {
    ensure(system.d2 == 1, || format!("Lyapunov check needs d2 = 1, got {}", system.d2))?;
    ensure(y1 != y2, || "y1 and y2 must differ".into())?;
    ensure(a > 0.0 && a < 0.5, || format!("need a in (0, 1/2), got {a}"))?;
    ensure(tol > 0.0, || "quadrature tolerance must be positive".into())?;
    let r = (y1 - y2).abs();
    let alpha = system.alpha2;
    let mut f1 = [0.0];
    let mut f2 = [0.0];
    (system.f)(x, &[y1], &mut f1);
    (system.f)(x, &[y2], &mut f2);
    let drift = psi_d1(params, r)? * (f1[0] - f2[0]) * (y1 - y2) / r;

    let jump = if r <= params.l0 {
        let h_tilde = reflected_density_min(system, x, y1, y2, alpha)?;
        let radius = a * r;
        let half = integrate(&|z: f64| z.powf(1.0 - alpha), 0.0, radius, tol)?;
        2.0 * psi_d2(params, (1.0 + 2.0 * a) * r)? * 2.0 * half * h_tilde
    } else {
        0.0
    };
    Ok(LyapunovTerms { r, drift, jump, total: drift + jump, psi: psi(params, r)? })
}

/// `H̃`: minimum of `H(y1, ẑ)`, `H(y2, ẑ)`, `H(y1, φ(ẑ))`, `H(y2, φ(ẑ))` over
/// the two directions of the zero-dimensional sphere.
fn reflected_density_min(system: &SlowFastSystem, x: &[f64], y1: f64, y2: f64, alpha: f64) -> Result<f64> {
    let mut best = f64::INFINITY;
    for y in [y1, y2] {
        let m = JumpMatrix::new(DMatrix::from_column_slice(1, 1, &(system.delta2_scalar(x, y))))?;
        for dir in [1.0, -1.0] {
            let zh = SpherePoint::from_slice(&[dir])?;
            let phi = SpherePoint::from_slice(&reflection_map(&[y1], &[y2], &[dir]))?;
            best = best.min(spherical_density_h(&m, &zh, alpha)?).min(spherical_density_h(&m, &phi, alpha)?);
        }
    }
    Ok(best)
}

/// Outcome of the Lyapunov check over a set of pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    /// `min −total/ψ(r)` over the pairs; the check passes when positive.
    pub beta: f64,
    /// Pairs with `r > 2L₀` where `total ≤ −½·C·A·c₂·e^{c₂(r−2L₀)}·r` failed.
    pub tail_violations: usize,
    pub terms: Vec<LyapunovTerms>,
}

pub fn lyapunov_check(
    system: &SlowFastSystem,
    x: &[f64],
    pairs: &[(f64, f64)],
    params: &PsiParams,
    a: f64,
    tol: f64,
) -> Result<LyapunovReport> {
    let mut beta = f64::INFINITY;
    let mut tail_violations = 0;
    let mut terms = Vec::with_capacity(pairs.len());
    for &(y1, y2) in pairs {
        let t = lyapunov_rhs(system, x, y1, y2, params, a, tol)?;
        beta = beta.min(-t.total / t.psi);
        let s = t.r - 2.0 * params.l0;
        if s > 0.0 {
            let bound = -0.5 * system.regularity.c_dissip * params.a() * params.c2 * (params.c2 * s).exp() * t.r;
            if t.total > bound {
                tail_violations += 1;
            }
        }
        terms.push(t);
    }
    Ok(LyapunovReport { beta, tail_violations, terms })
}

impl SlowFastSystem {
    fn delta2_scalar(&self, x: &[f64], y: f64) -> [f64; 1] {
        let mut out = [0.0];
        (self.delta2)(x, &[y], &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;
    use crate::systems::stable_ou;
    use proptest::prelude::*;
    use rand::Rng;

    fn params() -> PsiParams {
        PsiParams::with_default_c2(3.0, 1.0).unwrap()
    }

    #[test]
    fn reflection_examples() {
        assert_eq!(reflection_map(&[1.0, 1.0], &[1.0, 1.0], &[1.0, 2.0]), vec![-1.0, -2.0]);
        assert_eq!(reflection_map(&[1.0, 0.0], &[0.0, 0.0], &[1.0, 0.0]), vec![-1.0, 0.0]);
        assert_eq!(reflection_map(&[1.0, 0.0], &[0.0, 0.0], &[0.0, 1.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn reflection_identities_random() {
        let mut rng = replica_rng(8, 0);
        for d in [1, 2, 3, 5] {
            for _ in 0..2000 {
                let mut v = || (0..d).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>();
                let (y1, y2, z) = (v(), v(), v());
                assert!(reflection_residual(&y1, &y2, &z) < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn reflection_preserves_norm(y1 in prop::collection::vec(-5.0..5.0f64, 3), y2 in prop::collection::vec(-5.0..5.0f64, 3), z in prop::collection::vec(-5.0..5.0f64, 3)) {
            prop_assert!(reflection_residual(&y1, &y2, &z) < 1e-12);
        }
    }

    #[test]
    fn psi_values_and_junction() {
        let p = params();
        assert_eq!(psi(&p, 0.0).unwrap(), 0.0);
        assert!((psi(&p, 2.0).unwrap() - (1.0 - (-6f64).exp())).abs() < 1e-15);
        for m in junction_mismatch(&p) {
            assert!(m.abs() < 1e-12, "{m}");
        }
        let h = 1e-7;
        let r = 2.0 * p.l0;
        // Jumps across the junction are bounded by 2h times the next derivative.
        let third = p.a() * p.c2.powi(3);
        assert!((psi(&p, r + h).unwrap() - psi(&p, r - h).unwrap()).abs() < 3.0 * h * p.c1);
        assert!((psi_d1(&p, r + h).unwrap() - psi_d1(&p, r - h).unwrap()).abs() < 3.0 * h * p.c1 * p.c1);
        assert!((psi_d2(&p, r + h).unwrap() - psi_d2(&p, r - h).unwrap()).abs() < 3.0 * h * third);
        assert!(matches!(psi(&p, -1.0), Err(Error::Domain(_))));
        assert!(PsiParams::new(1.0, 10.0, 1.0).is_err());
    }

    #[test]
    fn tail_margin_and_monotonicity() {
        for (c1, l0) in [(3.0, 1.0), (0.5, 0.2), (10.0, 2.0)] {
            let p = PsiParams::with_default_c2(c1, l0).unwrap();
            for k in 0..=10_000 {
                let r = 2.0 * l0 + 5.0 * l0 * k as f64 / 10_000.0;
                assert!(psi_tail_margin(&p, r) > 0.0);
                assert!(psi_d1(&p, r).unwrap() > 0.0);
                assert!(psi_d1(&p, r * 2.0 * l0 / (7.0 * l0)).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn comparison_constants() {
        let p = params();
        let c1 = comparison_constant(&p, 1.0, 1e-6, 100).unwrap();
        assert!((c1.c - 1.0 / p.c1).abs() < 1e-5, "{c1:?}");
        for power in [1.0, 1.3, 2.0] {
            let r_max = 5.0;
            let c = comparison_constant(&p, power, r_max, 10_000).unwrap();
            for k in 1..=10_000 {
                let r = r_max * k as f64 / 10_000.0;
                assert!(c.c * psi(&p, r).unwrap() - r.powf(power) >= 0.0);
            }
            if power > 1.0 {
                assert!(c.argmax > r_max / 100.0);
            }
        }
        for k in 1..=1000 {
            let r = 2.0 * p.l0 * k as f64 / 1000.0;
            assert!(psi(&p, r).unwrap() <= p.c1 * r);
        }
        assert!(comparison_constant(&p, 0.5, 1.0, 10).is_err());
    }

    #[test]
    fn lyapunov_stable_ou() {
        let sys = stable_ou(1.0, 1.0, 1.5);
        let p = params();
        let a = 1.0 / p.c1;
        // Drift term alone for a linear slope −1.
        let t = lyapunov_rhs(&sys, &[0.0], 0.1, 0.05, &p, a, 1e-12).unwrap();
        let r: f64 = 0.05;
        assert!((t.drift - (-p.c1 * (-p.c1 * r).exp() * r)).abs() < 1e-14);
        assert!(t.jump <= 0.0);
        // Closed form of the truncated integral: 2(ar)^{2−α}/(2−α).
        let expected = 2.0 * psi_d2(&p, (1.0 + 2.0 * a) * r).unwrap() * 2.0 * (a * r).powf(0.5) / 0.5;
        assert!((t.jump - expected).abs() < 1e-10 * expected.abs());

        let pairs: Vec<(f64, f64)> = (0..20).map(|k| (0.3 * k as f64 - 2.0, -0.17 * k as f64 + 0.5)).collect();
        let report = lyapunov_check(&sys, &[0.0], &pairs, &p, a, 1e-12).unwrap();
        assert!(report.beta > 0.0, "{report:?}");
        let tail: Vec<(f64, f64)> = (1..=10).map(|k| (0.0, 2.0 * p.l0 + 0.3 * k as f64)).collect();
        let report = lyapunov_check(&sys, &[0.0], &tail, &p, a, 1e-12).unwrap();
        assert_eq!(report.tail_violations, 0);
        assert!(lyapunov_rhs(&sys, &[0.0], 1.0, 1.0, &p, a, 1e-12).is_err());
    }
}
