//! Built-in desk systems and their closed-form averaged coefficients.
//!
//! | name    | b(t,x,y)          | δ₁                       | f(x,y)    | δ₂ |
//! |---------|-------------------|--------------------------|-----------|----|
//! | `D1`    | −x + cos(y−x)     | 1                        | x − y     | 1  |
//! | `D2`    | −x + cos(y−x)     | 1 + 0.2 sin(x) cos(y)    | x − y     | 1  |
//! | `OU`    | 0                 | 1                        | −a y      | σ  |
//! | `cubic` | 0                 | 1                        | −y − y³   | 1  |
//!
//! All with `d₁ = d₂ = 1`. The frozen equation of `D1`/`D2` is a stable
//! Ornstein-Uhlenbeck process centred at `x`, whose stationary law has
//! characteristic function `e^{iξx} exp(−|ξ|^α/α)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sde::{Regularity, SlowFastSystem, SlowNoise};

/// `E cos(S)` for the stationary stable OU law with rate `a` and scale `σ`.
pub fn stable_ou_mean_cos(a: f64, sigma: f64, alpha: f64) -> f64 {
    (-sigma.powf(alpha) / (a * alpha)).exp()
}

/// `E cos(Y_s)` for the stable OU process started at `y`.
pub fn stable_ou_conditional_cos(y: f64, s: f64, a: f64, sigma: f64, alpha: f64) -> f64 {
    (y * (-a * s).exp()).cos() * (-sigma.powf(alpha) * (1.0 - (-alpha * a * s).exp()) / (a * alpha)).exp()
}

fn zero_slow() -> crate::sde::SlowFn {
    Arc::new(|_, _, _, out: &mut [f64]| out.iter_mut().for_each(|o| *o = 0.0))
}

fn unit_time_noise() -> SlowNoise {
    SlowNoise::TimeOnly(Arc::new(|_, out: &mut [f64]| out[0] = 1.0))
}

fn cos_slow_drift() -> crate::sde::SlowFn {
    Arc::new(|_, x: &[f64], y: &[f64], out: &mut [f64]| out[0] = -x[0] + (y[0] - x[0]).cos())
}

fn relaxing_fast_drift() -> crate::sde::FastFn {
    Arc::new(|x: &[f64], y: &[f64], out: &mut [f64]| out[0] = x[0] - y[0])
}

fn unit_fast_noise() -> crate::sde::FastFn {
    Arc::new(|_, _, out: &mut [f64]| out[0] = 1.0)
}

/// Strong-rate desk system with additive slow noise.
pub fn d1(alpha: f64) -> SlowFastSystem {
    SlowFastSystem {
        name: "D1".into(),
        d1: 1,
        d2: 1,
        alpha1: alpha,
        alpha2: alpha,
        b: cos_slow_drift(),
        delta1: unit_time_noise(),
        f: relaxing_fast_drift(),
        delta2: unit_fast_noise(),
        regularity: Regularity {
            v: alpha,
            l0: 1.0,
            c_loc: 0.0,
            c_dissip: 1.0,
            lip_f: Some(1.0),
            c_l: 1.0,
            c_u: 1.0,
        },
    }
}

/// Weak-rate desk system with multiplicative slow noise.
pub fn d2(alpha: f64) -> SlowFastSystem {
    SlowFastSystem {
        name: "D2".into(),
        delta1: SlowNoise::State(Arc::new(|_, x: &[f64], y: &[f64], out: &mut [f64]| {
            out[0] = 1.0 + 0.2 * x[0].sin() * y[0].cos()
        })),
        ..d1(alpha)
    }
}

/// `E cos(S)` under the invariant law of the Euler chain
/// `S' = (1 − h)S + h^{1/α}ξ` of the unit stable OU process with fast step `h`.
pub fn euler_ou_mean_cos(h: f64, alpha: f64) -> f64 {
    (-h / (1.0 - (1.0 - h).powf(alpha))).exp()
}

/// `b̄(x) = −x + m` for the `D1`/`D2` drift, given `m = E cos(S)` of the
/// centred invariant law.
pub fn shifted_cos_drift(m: f64) -> impl Fn(f64, &[f64], &mut [f64]) + Sync + Send + Clone {
    move |_, x: &[f64], out: &mut [f64]| out[0] = -x[0] + m
}

/// `δ̄₁(x) = 1 + 0.2 sin(x) cos(x) m` for `D2`.
pub fn d2_noise_with(m: f64) -> impl Fn(f64, &[f64], &mut [f64]) + Sync + Send + Clone {
    move |_, x: &[f64], out: &mut [f64]| out[0] = 1.0 + 0.2 * x[0].sin() * x[0].cos() * m
}

/// Averaged drift of `D1`/`D2`: `b̄(x) = −x + e^{−1/α}`.
pub fn d1_averaged_drift(alpha: f64) -> impl Fn(f64, &[f64], &mut [f64]) + Sync + Send + Clone {
    shifted_cos_drift(stable_ou_mean_cos(1.0, 1.0, alpha))
}

/// Averaged slow noise of `D2`: `δ̄₁(x) = 1 + 0.2 sin(x) cos(x) e^{−1/α}`.
pub fn d2_averaged_noise(alpha: f64) -> impl Fn(f64, &[f64], &mut [f64]) + Sync + Send + Clone {
    d2_noise_with(stable_ou_mean_cos(1.0, 1.0, alpha))
}

/// Stable Ornstein-Uhlenbeck fast process `dY = −aY dt + σ dL` with a trivial
/// slow component.
pub fn stable_ou(a: f64, sigma: f64, alpha: f64) -> SlowFastSystem {
    SlowFastSystem {
        name: "OU".into(),
        d1: 1,
        d2: 1,
        alpha1: alpha,
        alpha2: alpha,
        b: zero_slow(),
        delta1: unit_time_noise(),
        f: Arc::new(move |_, y: &[f64], out: &mut [f64]| out[0] = -a * y[0]),
        delta2: Arc::new(move |_, _, out: &mut [f64]| out[0] = sigma),
        regularity: Regularity {
            v: alpha,
            l0: 1.0,
            c_loc: 0.0,
            c_dissip: a,
            lip_f: Some(a),
            c_l: sigma,
            c_u: sigma,
        },
    }
}

/// Nonlinear dissipative fast drift `f(y) = −y − y³`.
pub fn cubic(alpha: f64) -> SlowFastSystem {
    SlowFastSystem {
        name: "cubic".into(),
        f: Arc::new(|_, y: &[f64], out: &mut [f64]| out[0] = -y[0] - y[0] * y[0] * y[0]),
        regularity: Regularity { lip_f: None, ..stable_ou(1.0, 1.0, alpha).regularity },
        ..stable_ou(1.0, 1.0, alpha)
    }
}

pub const BUILTIN_NAMES: [&str; 4] = ["D1", "D2", "OU", "cubic"];

/// Look up a built-in system; `OU` uses `a = σ = 1`.
pub fn builtin(name: &str, alpha: f64) -> Result<SlowFastSystem> {
    let sys = match name {
        "D1" => d1(alpha),
        "D2" => d2(alpha),
        "OU" => stable_ou(1.0, 1.0, alpha),
        "cubic" => cubic(alpha),
        other => {
            return Err(Error::Config(format!(
                "unknown built-in system {other:?}; expected one of {BUILTIN_NAMES:?}"
            )))
        }
    };
    sys.validate()?;
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;

    #[test]
    fn builtins_validate() {
        for name in BUILTIN_NAMES {
            builtin(name, 1.5).unwrap();
        }
        assert!(builtin("nope", 1.5).is_err());
        assert!(builtin("D1", 2.0).is_err());
    }

    #[test]
    fn dissipativity_and_ellipticity_spot_checks() {
        let mut rng = replica_rng(1, 0);
        for name in BUILTIN_NAMES {
            let sys = builtin(name, 1.5).unwrap();
            let worst = sys.check_dissipativity(&[0.3], 5.0, 500, &mut rng).unwrap();
            assert!(worst <= -sys.regularity.c_dissip + 1e-12);
            let pts: Vec<(Vec<f64>, Vec<f64>)> = (0..10).map(|k| (vec![k as f64 * 0.1], vec![k as f64 - 5.0])).collect();
            sys.check_ellipticity(&pts).unwrap();
        }
    }

    #[test]
    fn slow_drift_bound_hook() {
        let sys = d1(1.5);
        let pts: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..20).map(|k| (0.0, vec![k as f64 * 0.1 - 1.0], vec![k as f64])).collect();
        assert!(sys.check_slow_drift_bound(&pts, 3.0).is_ok());
        assert!(sys.check_slow_drift_bound(&pts, 0.5).is_err());
    }

    #[test]
    fn closed_forms() {
        assert!((stable_ou_mean_cos(1.0, 1.0, 1.5) - 0.513_417_119_032_592).abs() < 1e-12);
        assert!((stable_ou_conditional_cos(0.7, 0.0, 1.0, 1.0, 1.5) - 0.7f64.cos()).abs() < 1e-15);
        assert!((euler_ou_mean_cos(1e-7, 1.5) - stable_ou_mean_cos(1.0, 1.0, 1.5)).abs() < 1e-6);
        assert!((stable_ou_conditional_cos(0.7, 60.0, 1.0, 1.0, 1.5) - stable_ou_mean_cos(1.0, 1.0, 1.5)).abs() < 1e-12);
    }
}
