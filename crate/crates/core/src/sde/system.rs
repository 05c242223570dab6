use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::sphere_geometry::JumpMatrix;

/// `(t, x, y, out)`: slow drift `b`, or a full-state slow noise matrix
/// (row-major `d₁ × d₁`).
pub type SlowFn = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(t, out)`: slow noise matrix depending on time only.
pub type TimeFn = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;
/// `(x, y, out)`: fast drift `f`, or fast noise matrix `δ₂` (row-major).
pub type FastFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Slow noise coefficient. Strong-rate experiments need the time-only form,
/// which is the only case where the error process carries no stochastic
/// integral.
#[derive(Clone)]
pub enum SlowNoise {
    TimeOnly(TimeFn),
    State(SlowFn),
}

impl SlowNoise {
    #[inline]
    pub fn eval(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        match self {
            SlowNoise::TimeOnly(g) => g(t, out),
            SlowNoise::State(g) => g(t, x, y, out),
        }
    }

    pub fn is_time_only(&self) -> bool {
        matches!(self, SlowNoise::TimeOnly(_))
    }
}

/// Regularity metadata carried alongside the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Regularity {
    /// Hölder exponent `v ∈ ((α₁−α₂)⁺, α₁]`.
    pub v: f64,
    /// Dissipativity radius `L₀`.
    pub l0: f64,
    /// Local one-sided Lipschitz constant `c` for `|y₁−y₂| <= L₀`.
    pub c_loc: f64,
    /// Dissipativity constant `C` for `|y₁−y₂| > L₀`.
    pub c_dissip: f64,
    /// Lipschitz constant of `f` in `y`, when known (stability guard).
    pub lip_f: Option<f64>,
    /// Declared ellipticity bounds `c_l <= σ(δ₂) <= c_u`.
    pub c_l: f64,
    pub c_u: f64,
}

impl Default for Regularity {
    fn default() -> Self {
        Self { v: 1.0, l0: 1.0, c_loc: 0.0, c_dissip: 1.0, lip_f: Some(1.0), c_l: 1.0, c_u: 1.0 }
    }
}

/// Coefficients of
///
/// ```text
/// dX = b(t,X,Y) dt + δ₁(t,X,Y) dL¹
/// dY = ε⁻¹ f(X,Y) dt + ε^{-1/α₂} δ₂(X,Y) dL²
/// ```
///
/// Callbacks must be pure and safe to call concurrently.
#[derive(Clone)]
pub struct SlowFastSystem {
    pub name: String,
    pub d1: usize,
    pub d2: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub b: SlowFn,
    pub delta1: SlowNoise,
    pub f: FastFn,
    pub delta2: FastFn,
    pub regularity: Regularity,
}

impl fmt::Debug for SlowFastSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SlowFastSystem")
            .field("name", &self.name)
            .field("d1", &self.d1)
            .field("d2", &self.d2)
            .field("alpha1", &self.alpha1)
            .field("alpha2", &self.alpha2)
            .field("delta1_time_only", &self.delta1.is_time_only())
            .field("regularity", &self.regularity)
            .finish()
    }
}

impl SlowFastSystem {
    pub fn validate(&self) -> Result<()> {
        if self.d1 == 0 || self.d2 == 0 {
            return Err(Error::Parameter("dimensions must be positive".into()));
        }
        for (name, a) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(a > 1.0 && a < 2.0) {
                return Err(Error::Parameter(format!("{name} must lie in (1, 2), got {a}")));
            }
        }
        let r = &self.regularity;
        let lo = (self.alpha1 - self.alpha2).max(0.0);
        if !(r.v > lo && r.v <= self.alpha1) {
            return Err(Error::Parameter(format!(
                "Hölder exponent v = {} outside ({lo}, {}]",
                r.v, self.alpha1
            )));
        }
        if !(r.l0 > 0.0 && r.c_dissip > 0.0 && r.c_l > 0.0 && r.c_u >= r.c_l) {
            return Err(Error::Parameter("regularity constants out of range".into()));
        }
        Ok(())
    }

    pub fn eval_delta2(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let mut buf = vec![0.0; self.d2 * self.d2];
        (self.delta2)(x, y, &mut buf);
        DMatrix::from_row_slice(self.d2, self.d2, &buf)
    }

    /// Spot-check `⟨f(x,y₁)−f(x,y₂), y₁−y₂⟩ <= −C|y₁−y₂|²` for random pairs
    /// farther apart than `L₀`, with `y` drawn from `[-radius, radius]^{d₂}`.
    /// Returns the worst observed ratio `⟨·,·⟩/|y₁−y₂|²`.
    pub fn check_dissipativity<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        radius: f64,
        pairs: usize,
        rng: &mut R,
    ) -> Result<f64> {
        let d = self.d2;
        let mut f1 = vec![0.0; d];
        let mut f2 = vec![0.0; d];
        let mut worst = f64::NEG_INFINITY;
        let mut tested = 0;
        while tested < pairs {
            let y1: Vec<f64> = (0..d).map(|_| radius * (2.0 * rng.random::<f64>() - 1.0)).collect();
            let y2: Vec<f64> = (0..d).map(|_| radius * (2.0 * rng.random::<f64>() - 1.0)).collect();
            let diff: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a - b).collect();
            let r2: f64 = diff.iter().map(|v| v * v).sum();
            if r2.sqrt() <= self.regularity.l0 {
                continue;
            }
            (self.f)(x, &y1, &mut f1);
            (self.f)(x, &y2, &mut f2);
            let inner: f64 = f1.iter().zip(&f2).zip(&diff).map(|((a, b), c)| (a - b) * c).sum();
            worst = worst.max(inner / r2);
            tested += 1;
        }
        if worst > -self.regularity.c_dissip + 1e-12 {
            return Err(Error::Parameter(format!(
                "dissipativity violated: worst ratio {worst} > -C = {}",
                -self.regularity.c_dissip
            )));
        }
        Ok(worst)
    }

    /// Check that `δ₂(x, y)` satisfies the declared ellipticity bounds at the
    /// given points.
    pub fn check_ellipticity(&self, points: &[(Vec<f64>, Vec<f64>)]) -> Result<()> {
        for (x, y) in points {
            JumpMatrix::with_declared_bounds(self.eval_delta2(x, y), self.regularity.c_l, self.regularity.c_u)?;
        }
        Ok(())
    }

    /// Boundedness hook for the slow drift: `max |b|` over the sample points,
    /// failing when it exceeds `bound`.
    pub fn check_slow_drift_bound(&self, points: &[(f64, Vec<f64>, Vec<f64>)], bound: f64) -> Result<f64> {
        let mut out = vec![0.0; self.d1];
        let mut worst: f64 = 0.0;
        for (t, x, y) in points {
            (self.b)(*t, x, y, &mut out);
            worst = worst.max(crate::stable_noise::norm(&out));
        }
        if worst > bound {
            return Err(Error::Parameter(format!("|b| reached {worst}, above bound {bound}")));
        }
        Ok(worst)
    }
}

/// Trajectory of one replica. `x_path` is empty for frozen paths and
/// `y_path` is empty for averaged paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub x_path: Vec<Vec<f64>>,
    pub y_path: Vec<Vec<f64>>,
    pub seed: u64,
    /// Steps at which a drift was clamped to the magnitude cap.
    pub clipped_steps: u64,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_x(&self) -> Option<&[f64]> {
        self.x_path.last().map(|v| v.as_slice())
    }

    pub fn final_y(&self) -> Option<&[f64]> {
        self.y_path.last().map(|v| v.as_slice())
    }
}
