//! Geometry of the direction change induced by a jump coefficient.
//!
//! For an invertible `A` the map `G(ẑ) = Aẑ/|Aẑ|` sends jump directions to
//! directions of `A·z`; its inverse is the immersion
//! `F(ω̂) = A⁻¹ω̂/|A⁻¹ω̂|`. The tangent map of `F` between `T_ω̂ S^{d-1}` and
//! `T_{F(ω̂)} S^{d-1}` is
//!
//! ```text
//! dF(ω̂)v = |A⁻¹ω̂|⁻¹ (I − ŵŵᵀ) A⁻¹v,   ŵ = A⁻¹ω̂/|A⁻¹ω̂|
//! ```
//!
//! with intrinsic Jacobian `J_F(ω̂) = det(A⁻¹)/|A⁻¹ω̂|^d`. The spherical
//! density of the pushed-forward Lévy measure is
//! `H(ẑ) = (|det A| · |A⁻¹ẑ|^{α+d})⁻¹`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Value of the jump coefficient at a point, with its singular-value bounds.
#[derive(Debug, Clone)]
pub struct JumpMatrix {
    entries: DMatrix<f64>,
    inverse: DMatrix<f64>,
    det: f64,
    c_l: f64,
    c_u: f64,
}

impl JumpMatrix {
    /// Bounds `c_l, c_u` are the extreme singular values of `entries`.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::LinearAlgebra(format!(
                "jump matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearAlgebra("jump matrix has non-finite entries".into()));
        }
        let sv = entries.clone().svd(false, false).singular_values;
        let c_u = sv.max();
        let c_l = sv.min();
        if !(c_l > 1e-14 * c_u.max(1e-300)) {
            return Err(Error::LinearAlgebra(format!("jump matrix is singular (σ_min = {c_l:e})")));
        }
        let inverse = entries
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::LinearAlgebra("jump matrix is singular".into()))?;
        let det = entries.determinant();
        Ok(Self { entries, inverse, det, c_l, c_u })
    }

    /// Like [`JumpMatrix::new`], also checking the computed singular values
    /// against declared ellipticity constants.
    pub fn with_declared_bounds(entries: DMatrix<f64>, c_l: f64, c_u: f64) -> Result<Self> {
        let m = Self::new(entries)?;
        let slack = 1e-12 * c_u.abs().max(1.0);
        if m.c_l < c_l - slack || m.c_u > c_u + slack {
            return Err(Error::Parameter(format!(
                "singular values [{}, {}] violate declared ellipticity bounds [{c_l}, {c_u}]",
                m.c_l, m.c_u
            )));
        }
        Ok(m)
    }

    pub fn from_row_slice(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::LinearAlgebra(format!("expected {} entries, got {}", dim * dim, data.len())));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, data))
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is invertible")
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn c_l(&self) -> f64 {
        self.c_l
    }

    pub fn c_u(&self) -> f64 {
        self.c_u
    }

    /// `[(c_l/c_u)^d, (c_u/c_l)^d]`, the admissible range of `|J_F|`.
    pub fn jacobian_bounds(&self) -> (f64, f64) {
        let d = self.dim() as i32;
        ((self.c_l / self.c_u).powi(d), (self.c_u / self.c_l).powi(d))
    }

    /// Two-sided bounds on `H` from the singular values.
    pub fn density_bounds(&self, alpha: f64) -> (f64, f64) {
        let d = self.dim() as f64;
        (
            self.c_l.powf(alpha + d) / self.c_u.powf(d),
            self.c_u.powf(alpha + d) / self.c_l.powf(d),
        )
    }
}

/// A point on the unit sphere `S^{d-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    coords: DVector<f64>,
}

impl SpherePoint {
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        if (coords.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition(format!("not a unit vector (norm {})", coords.norm())));
        }
        Ok(Self { coords })
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(v))
    }

    pub fn normalize(v: DVector<f64>) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Precondition("cannot normalise a zero or non-finite vector".into()));
        }
        Ok(Self { coords: v / n })
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

fn check_dims(a: &JumpMatrix, p: &SpherePoint) -> Result<()> {
    if a.dim() != p.dim() {
        return Err(Error::Parameter(format!("matrix dim {} vs point dim {}", a.dim(), p.dim())));
    }
    Ok(())
}

/// `F(ω̂) = A⁻¹ω̂ / |A⁻¹ω̂|`.
pub fn immersion(a: &JumpMatrix, omega_hat: &SpherePoint) -> Result<SpherePoint> {
    check_dims(a, omega_hat)?;
    SpherePoint::normalize(a.inverse() * omega_hat.coords())
}

/// `G(ẑ) = Aẑ / |Aẑ|`, the inverse of [`immersion`].
pub fn direction_of_jump(a: &JumpMatrix, z_hat: &SpherePoint) -> Result<SpherePoint> {
    check_dims(a, z_hat)?;
    SpherePoint::normalize(a.entries() * z_hat.coords())
}

/// Tangent map `dF(ω̂)v`; `v` must be tangent at `ω̂`.
pub fn tangent_map(a: &JumpMatrix, omega_hat: &SpherePoint, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_dims(a, omega_hat)?;
    if v.len() != a.dim() {
        return Err(Error::Parameter("tangent vector has wrong dimension".into()));
    }
    let dot = omega_hat.coords().dot(v);
    if dot.abs() > 1e-10 {
        return Err(Error::Precondition(format!("vector is not tangent at ω̂ (⟨ω̂, v⟩ = {dot:e})")));
    }
    let w = a.inverse() * omega_hat.coords();
    let wn2 = w.norm_squared();
    let u = a.inverse() * v;
    let projected = &u - &w * (w.dot(&u) / wn2);
    Ok(projected / wn2.sqrt())
}

/// Intrinsic Jacobian determinant `det(A⁻¹)/|A⁻¹ω̂|^d`, signed with respect
/// to positively oriented tangent frames.
pub fn jacobian_det(a: &JumpMatrix, omega_hat: &SpherePoint) -> Result<f64> {
    check_dims(a, omega_hat)?;
    let w = a.inverse() * omega_hat.coords();
    Ok((1.0 / a.det()) / w.norm().powi(a.dim() as i32))
}

/// Spherical density `H(ẑ) = (|det A| · |A⁻¹ẑ|^{α+d})⁻¹`.
pub fn spherical_density_h(a: &JumpMatrix, z_hat: &SpherePoint, alpha: f64) -> Result<f64> {
    check_dims(a, z_hat)?;
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::Parameter(format!("alpha must lie in (1, 2), got {alpha}")));
    }
    let w = a.inverse() * z_hat.coords();
    Ok(1.0 / (a.det().abs() * w.norm().powf(alpha + a.dim() as f64)))
}

/// Orthonormal basis of `T_ω̂ S^{d-1}` by Householder completion of `ω̂`.
///
/// The frame `(ω̂, v₁, …, v_{d-1})` is positively oriented.
pub fn orthonormal_tangent_basis(omega_hat: &SpherePoint) -> Vec<DVector<f64>> {
    let w = omega_hat.coords();
    let d = w.len();
    if d == 1 {
        return Vec::new();
    }
    // Reflection H = I − 2uuᵀ with H e₁ = ±ω̂; the sign of e₁ keeps |u| ≥ √2.
    let mut e1 = DVector::zeros(d);
    let sign = if w[0] >= 0.0 { -1.0 } else { 1.0 };
    e1[0] = sign;
    let u = &e1 - w;
    let u = &u / u.norm();
    let mut basis: Vec<DVector<f64>> = (1..d)
        .map(|k| {
            let mut ek = DVector::zeros(d);
            ek[k] = 1.0;
            &ek - &u * (2.0 * u[k])
        })
        .collect();
    // Flip the last vector if the frame came out negatively oriented.
    let mut frame = DMatrix::zeros(d, d);
    frame.set_column(0, w);
    for (k, b) in basis.iter().enumerate() {
        frame.set_column(k + 1, b);
    }
    if frame.determinant() < 0.0 {
        let last = basis.last_mut().expect("d >= 2");
        *last = -last.clone();
    }
    basis
}

/// Independent numerical checks of the closed forms above: finite
/// differences of [`immersion`], the pushforward histogram and the
/// derivative profile of `H`. Used by the acceptance suite and the
/// `geometry-check` subcommand.
pub mod checks {
    use std::f64::consts::PI;

    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::quadrature::integrate;
    use crate::stats::{chi_square, ChiSquareResult};

    /// Determinant of `[uⱼᵀ dF(ω̂) vᵢ]` where `dF` is approximated by central
    /// differences along geodesics `cos(h)ω̂ ± sin(h)vᵢ`.
    pub fn fd_tangent_determinant(a: &JumpMatrix, omega_hat: &SpherePoint, h: f64) -> Result<f64> {
        let d = a.dim();
        let image = immersion(a, omega_hat)?;
        let vs = orthonormal_tangent_basis(omega_hat);
        let us = orthonormal_tangent_basis(&image);
        let mut m = DMatrix::zeros(d - 1, d - 1);
        for (i, v) in vs.iter().enumerate() {
            let plus = SpherePoint::normalize(omega_hat.coords() * h.cos() + v * h.sin())?;
            let minus = SpherePoint::normalize(omega_hat.coords() * h.cos() - v * h.sin())?;
            let diff = (immersion(a, &plus)?.coords() - immersion(a, &minus)?.coords()) / (2.0 * h);
            for (j, u) in us.iter().enumerate() {
                m[(j, i)] = u.dot(&diff);
            }
        }
        Ok(m.determinant())
    }

    /// Determinant of the closed-form tangent map in the same frames.
    pub fn assembled_tangent_determinant(a: &JumpMatrix, omega_hat: &SpherePoint) -> Result<f64> {
        let d = a.dim();
        let image = immersion(a, omega_hat)?;
        let vs = orthonormal_tangent_basis(omega_hat);
        let us = orthonormal_tangent_basis(&image);
        let mut m = DMatrix::zeros(d - 1, d - 1);
        for (i, v) in vs.iter().enumerate() {
            let dv = tangent_map(a, omega_hat, v)?;
            for (j, u) in us.iter().enumerate() {
                m[(j, i)] = u.dot(&dv);
            }
        }
        Ok(m.determinant())
    }

    pub fn uniform_on_sphere<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> SpherePoint {
        loop {
            let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            if let Ok(p) = SpherePoint::normalize(v) {
                return p;
            }
        }
    }

    /// Random matrix with condition number at most `max_condition`, built as
    /// `Q₁ diag(σ) Q₂` with Haar-ish orthogonal factors from QR.
    pub fn random_conditioned_matrix<R: Rng + ?Sized>(dim: usize, max_condition: f64, rng: &mut R) -> JumpMatrix {
        let gauss = |rng: &mut R| DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q1 = gauss(rng).qr().q();
        let q2 = gauss(rng).qr().q();
        let log_kappa = max_condition.ln();
        let scale = (rng.random::<f64>() * 2.0 - 1.0).exp();
        let sv = DVector::from_fn(dim, |i, _| {
            if i == 0 {
                scale
            } else if i == 1 {
                scale * (-log_kappa).exp()
            } else {
                scale * (-log_kappa * rng.random::<f64>()).exp()
            }
        });
        let mut m = q1 * DMatrix::from_diagonal(&sv) * q2;
        if rng.random::<bool>() {
            m.row_mut(0).neg_mut();
        }
        JumpMatrix::new(m).expect("well-conditioned by construction")
    }

    #[derive(Debug, Clone)]
    pub struct JacobianTrial {
        pub dim: usize,
        pub closed_form: f64,
        pub finite_difference: f64,
        pub rel_error: f64,
        pub lower_bound: f64,
        pub upper_bound: f64,
        pub within_bounds: bool,
    }

    pub fn jacobian_trial<R: Rng + ?Sized>(dim: usize, max_condition: f64, rng: &mut R) -> Result<JacobianTrial> {
        let a = random_conditioned_matrix(dim, max_condition, rng);
        let omega = uniform_on_sphere(dim, rng);
        let closed_form = jacobian_det(&a, &omega)?;
        let finite_difference = fd_tangent_determinant(&a, &omega, 1e-6)?;
        let (lower_bound, upper_bound) = a.jacobian_bounds();
        let abs = closed_form.abs();
        let slack = 1e-12 * upper_bound;
        Ok(JacobianTrial {
            dim,
            closed_form,
            finite_difference,
            rel_error: (closed_form - finite_difference).abs() / abs,
            lower_bound,
            upper_bound,
            within_bounds: abs >= lower_bound - slack && abs <= upper_bound + slack,
        })
    }

    /// Histogram of `atan2(ω̂)` for `ω̂ = Aẑ/|Aẑ|`, `ẑ` uniform on S¹, tested
    /// against the density `|J_F(θ)|/(2π)` integrated over each bin.
    pub fn pushforward_chi_square<R: Rng + ?Sized>(
        a: &JumpMatrix,
        samples: usize,
        bins: usize,
        rng: &mut R,
    ) -> Result<ChiSquareResult> {
        if a.dim() != 2 {
            return Err(Error::Parameter("pushforward histogram is implemented for d = 2".into()));
        }
        let m = a.entries();
        let mut counts = vec![0u64; bins];
        for _ in 0..samples {
            let th = 2.0 * PI * rng.random::<f64>();
            let (c, s) = (th.cos(), th.sin());
            let wx = m[(0, 0)] * c + m[(0, 1)] * s;
            let wy = m[(1, 0)] * c + m[(1, 1)] * s;
            let phi = wy.atan2(wx) + PI;
            let k = ((phi / (2.0 * PI)) * bins as f64) as usize;
            counts[k.min(bins - 1)] += 1;
        }
        let density = |phi: f64| {
            let p = SpherePoint::from_slice(&[phi.cos(), phi.sin()]).expect("unit");
            jacobian_det(a, &p).expect("same dim").abs() / (2.0 * PI)
        };
        let width = 2.0 * PI / bins as f64;
        let expected = (0..bins)
            .map(|k| {
                let lo = -PI + k as f64 * width;
                integrate(&density, lo, lo + width, 1e-13).map(|p| p * samples as f64)
            })
            .collect::<Result<Vec<f64>>>()?;
        chi_square(&counts, &expected)
    }

    /// Maximum absolute first and second central differences of
    /// `y ↦ H(A(y), ẑ)` along each coordinate of `y`, over the given points.
    pub fn h_derivative_profile(
        field: &dyn Fn(&[f64]) -> DMatrix<f64>,
        points: &[Vec<f64>],
        z_hat: &SpherePoint,
        alpha: f64,
        step: f64,
    ) -> Result<(f64, f64)> {
        let h_at = |y: &[f64]| -> Result<f64> { spherical_density_h(&JumpMatrix::new(field(y))?, z_hat, alpha) };
        let mut max1: f64 = 0.0;
        let mut max2: f64 = 0.0;
        for y in points {
            let h0 = h_at(y)?;
            for k in 0..y.len() {
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[k] += step;
                ym[k] -= step;
                let (hp, hm) = (h_at(&yp)?, h_at(&ym)?);
                max1 = max1.max(((hp - hm) / (2.0 * step)).abs());
                max2 = max2.max(((hp - 2.0 * h0 + hm) / (step * step)).abs());
            }
        }
        Ok((max1, max2))
    }
}

#[cfg(test)]
mod tests {
    use super::checks::*;
    use super::*;
    use crate::rng::replica_rng;

    fn diag21() -> JumpMatrix {
        JumpMatrix::from_row_slice(2, &[2.0, 0.0, 0.0, 1.0]).unwrap()
    }

    fn pt(v: &[f64]) -> SpherePoint {
        SpherePoint::from_slice(v).unwrap()
    }

    #[test]
    fn singular_matrix_rejected() {
        assert!(matches!(
            JumpMatrix::from_row_slice(2, &[1.0, 2.0, 2.0, 4.0]),
            Err(Error::LinearAlgebra(_))
        ));
        assert!(JumpMatrix::with_declared_bounds(DMatrix::identity(2, 2) * 3.0, 0.5, 2.0).is_err());
        assert!(JumpMatrix::with_declared_bounds(DMatrix::identity(2, 2) * 1.5, 0.5, 2.0).is_ok());
    }

    #[test]
    fn immersion_examples() {
        let w = pt(&[0.6, 0.8]);
        assert_eq!(immersion(&JumpMatrix::identity(2), &w).unwrap(), w);
        let e1 = immersion(&diag21(), &pt(&[1.0, 0.0])).unwrap();
        assert!((e1.coords() - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-15);
        let z = immersion(&diag21(), &w).unwrap();
        let n = (0.3f64 * 0.3 + 0.8 * 0.8).sqrt();
        assert!((z.coords()[0] - 0.3 / n).abs() < 1e-14);
        assert!((z.coords()[1] - 0.8 / n).abs() < 1e-14);
        assert!((z.coords()[0] - 0.35112).abs() < 1e-5 && (z.coords()[1] - 0.93633).abs() < 1e-5);
        let back = direction_of_jump(&diag21(), &z).unwrap();
        assert!((back.coords() - w.coords()).norm() < 1e-10);
    }

    #[test]
    fn tangent_map_examples() {
        let w = pt(&[0.6, 0.8]);
        let v = DVector::from_vec(vec![-0.8, 0.6]);
        let out = tangent_map(&JumpMatrix::identity(2), &w, &v).unwrap();
        assert!((out - &v).norm() < 1e-15);

        let out = tangent_map(&diag21(), &pt(&[0.0, 1.0]), &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert!((out - DVector::from_vec(vec![0.5, 0.0])).norm() < 1e-15);

        let zero = tangent_map(&diag21(), &w, &DVector::zeros(2)).unwrap();
        assert_eq!(zero.norm(), 0.0);

        assert!(matches!(
            tangent_map(&diag21(), &w, &DVector::from_vec(vec![1.0, 0.0])),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn tangent_map_lands_in_tangent_space() {
        let mut rng = replica_rng(1, 0);
        for _ in 0..50 {
            let a = random_conditioned_matrix(3, 10.0, &mut rng);
            let w = uniform_on_sphere(3, &mut rng);
            let image = immersion(&a, &w).unwrap();
            let basis = orthonormal_tangent_basis(&w);
            let v1 = tangent_map(&a, &w, &basis[0]).unwrap();
            let v2 = tangent_map(&a, &w, &basis[1]).unwrap();
            assert!(image.coords().dot(&v1).abs() < 1e-10);
            let combo = tangent_map(&a, &w, &(&basis[0] * 2.0 - &basis[1] * 0.5)).unwrap();
            assert!((combo - (v1 * 2.0 - v2 * 0.5)).norm() < 1e-12);
        }
    }

    #[test]
    fn jacobian_examples() {
        let mut rng = replica_rng(2, 0);
        for _ in 0..10 {
            let w = uniform_on_sphere(3, &mut rng);
            assert!((jacobian_det(&JumpMatrix::identity(3), &w).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!((jacobian_det(&diag21(), &pt(&[1.0, 0.0])).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = replica_rng(3, 0);
        for dim in [2, 3] {
            for _ in 0..40 {
                let t = jacobian_trial(dim, 10.0, &mut rng).unwrap();
                assert!(t.rel_error < 1e-6, "{t:?}");
                assert!(t.within_bounds, "{t:?}");
            }
        }
    }

    #[test]
    fn assembled_determinant_matches_closed_form() {
        let mut rng = replica_rng(4, 0);
        for dim in [2, 3, 4] {
            for _ in 0..20 {
                let a = random_conditioned_matrix(dim, 10.0, &mut rng);
                let w = uniform_on_sphere(dim, &mut rng);
                let j = jacobian_det(&a, &w).unwrap();
                let assembled = assembled_tangent_determinant(&a, &w).unwrap();
                assert!((j - assembled).abs() < 1e-10 * j.abs());
            }
        }
    }

    #[test]
    fn density_examples() {
        let mut rng = replica_rng(5, 0);
        let z = uniform_on_sphere(2, &mut rng);
        assert!((spherical_density_h(&JumpMatrix::identity(2), &z, 1.5).unwrap() - 1.0).abs() < 1e-14);
        let h = spherical_density_h(&diag21(), &pt(&[1.0, 0.0]), 1.5).unwrap();
        assert!((h - 2f64.powf(2.5)).abs() < 1e-12);
        assert!((h - 5.65685).abs() < 1e-5);
        assert!(spherical_density_h(&diag21(), &pt(&[1.0, 0.0]), 2.0).is_err());
    }

    #[test]
    fn density_within_ellipticity_bounds() {
        let mut rng = replica_rng(6, 0);
        for _ in 0..100 {
            let a = random_conditioned_matrix(3, 10.0, &mut rng);
            let z = uniform_on_sphere(3, &mut rng);
            let h = spherical_density_h(&a, &z, 1.5).unwrap();
            let (lo, hi) = a.density_bounds(1.5);
            assert!(h > 0.0 && h >= lo * (1.0 - 1e-12) && h <= hi * (1.0 + 1e-12));
        }
    }

    #[test]
    fn tangent_basis_examples() {
        let b = orthonormal_tangent_basis(&pt(&[1.0, 0.0]));
        assert_eq!(b.len(), 1);
        assert!((b[0][0]).abs() < 1e-15 && (b[0][1].abs() - 1.0).abs() < 1e-15);

        let b = orthonormal_tangent_basis(&pt(&[0.0, 0.0, 1.0]));
        for v in &b {
            assert!(v[2].abs() < 1e-15);
        }
        assert!((b[0].dot(&b[1])).abs() < 1e-15);

        let mut rng = replica_rng(7, 0);
        for _ in 0..20 {
            let w = uniform_on_sphere(5, &mut rng);
            let b = orthonormal_tangent_basis(&w);
            let mut m = DMatrix::zeros(5, 5);
            m.set_column(0, w.coords());
            for (k, v) in b.iter().enumerate() {
                m.set_column(k + 1, v);
            }
            let gram = m.transpose() * &m;
            assert!((gram - DMatrix::identity(5, 5)).abs().max() < 1e-12);
            assert!(m.determinant() > 0.0);
        }
    }

    #[test]
    fn h_derivatives_stable_under_refinement() {
        let field = |y: &[f64]| {
            let s = y[0].sin();
            DMatrix::from_row_slice(2, 2, &[2.0 + 0.5 * s, 0.3 * y[0].cos(), 0.1 * s, 1.0 + 0.2 * (2.0 * y[0]).cos()])
        };
        let points: Vec<Vec<f64>> = (0..41).map(|k| vec![-4.0 + 0.2 * k as f64]).collect();
        let z = pt(&[0.6, 0.8]);
        let profiles: Vec<(f64, f64)> = [1e-2, 1e-3]
            .iter()
            .map(|&h| h_derivative_profile(&field, &points, &z, 1.5, h).unwrap())
            .collect();
        assert!(profiles.iter().all(|p| p.0.is_finite() && p.1.is_finite()));
        let (d1a, d2a) = profiles[0];
        let (d1b, d2b) = profiles[1];
        assert!((d1a - d1b).abs() < 0.05 * d1b.max(1.0));
        assert!((d2a - d2b).abs() < 0.05 * d2b.max(1.0));
    }

    proptest::proptest! {
        #[test]
        fn immersion_round_trip(
            entries in proptest::collection::vec(-2.0f64..2.0, 9),
            dir in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let m = DMatrix::from_row_slice(3, 3, &entries) + DMatrix::identity(3, 3) * 3.0;
            let a = JumpMatrix::new(m).unwrap();
            if let Ok(w) = SpherePoint::normalize(DVector::from_vec(dir)) {
                let z = immersion(&a, &w).unwrap();
                let back = direction_of_jump(&a, &z).unwrap();
                proptest::prop_assert!((back.coords() - w.coords()).norm() < 1e-10);
            }
        }
    }
}
