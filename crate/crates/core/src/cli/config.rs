//! Versioned JSON experiment configuration.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coupling::PsiParams;
use crate::ergodics::{AveragingGrid, CorrectorConfig, ErgodicConfig, GridAxis, TransientConfig};
use crate::error::{Error, Result};
use crate::rates::SweepConfig;
use crate::sde::{Regularity, SlowFastSystem, SlowNoise};
use crate::systems;

pub const SCHEMA_VERSION: u32 = 1;

/// Scalar coefficient expression in the variables `t`, `x`, `y` (first
/// components of the slow and fast states).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Expr {
    Const { value: f64 },
    Var { name: Variable },
    Add { terms: Vec<Expr> },
    Mul { factors: Vec<Expr> },
    /// `c₀ + c₁v + c₂v² + …` in one variable.
    Poly { var: Variable, coeffs: Vec<f64> },
    Pow { base: Box<Expr>, exponent: i32 },
    Sin { arg: Box<Expr> },
    Cos { arg: Box<Expr> },
    Exp { arg: Box<Expr> },
    Tanh { arg: Box<Expr> },
    /// `pieces[k]` applies on `[breaks[k-1], breaks[k])`.
    Piecewise { var: Variable, breaks: Vec<f64>, pieces: Vec<Expr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    T,
    X,
    Y,
}

impl Expr {
    pub fn eval(&self, t: f64, x: f64, y: f64) -> f64 {
        let var = |v: &Variable| match v {
            Variable::T => t,
            Variable::X => x,
            Variable::Y => y,
        };
        match self {
            Expr::Const { value } => *value,
            Expr::Var { name } => var(name),
            Expr::Add { terms } => terms.iter().map(|e| e.eval(t, x, y)).sum(),
            Expr::Mul { factors } => factors.iter().map(|e| e.eval(t, x, y)).product(),
            Expr::Poly { var: v, coeffs } => {
                let s = var(v);
                coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
            }
            Expr::Pow { base, exponent } => base.eval(t, x, y).powi(*exponent),
            Expr::Sin { arg } => arg.eval(t, x, y).sin(),
            Expr::Cos { arg } => arg.eval(t, x, y).cos(),
            Expr::Exp { arg } => arg.eval(t, x, y).exp(),
            Expr::Tanh { arg } => arg.eval(t, x, y).tanh(),
            Expr::Piecewise { var: v, breaks, pieces } => {
                let s = var(v);
                let k = breaks.partition_point(|b| *b <= s);
                pieces[k].eval(t, x, y)
            }
        }
    }

    pub fn uses(&self, v: Variable) -> bool {
        match self {
            Expr::Const { .. } => false,
            Expr::Var { name } => *name == v,
            Expr::Add { terms: es } | Expr::Mul { factors: es } => es.iter().any(|e| e.uses(v)),
            Expr::Poly { var, coeffs } => *var == v && coeffs.len() > 1,
            Expr::Pow { base, .. } => base.uses(v),
            Expr::Sin { arg } | Expr::Cos { arg } | Expr::Exp { arg } | Expr::Tanh { arg } => arg.uses(v),
            Expr::Piecewise { var, pieces, .. } => *var == v || pieces.iter().any(|e| e.uses(v)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Expr::Add { terms: es } | Expr::Mul { factors: es } => es.iter().try_for_each(Expr::validate),
            Expr::Pow { base, .. } => base.validate(),
            Expr::Sin { arg } | Expr::Cos { arg } | Expr::Exp { arg } | Expr::Tanh { arg } => arg.validate(),
            Expr::Piecewise { breaks, pieces, .. } => {
                if pieces.len() != breaks.len() + 1 {
                    return Err(Error::Config(format!(
                        "piecewise expression needs {} pieces for {} breaks, got {}",
                        breaks.len() + 1,
                        breaks.len(),
                        pieces.len()
                    )));
                }
                if breaks.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config("piecewise breaks must be strictly increasing".into()));
                }
                pieces.iter().try_for_each(Expr::validate)
            }
            _ => Ok(()),
        }
    }

    pub fn constant(value: f64) -> Self {
        Expr::Const { value }
    }

    pub fn cos_of(var: Variable) -> Self {
        Expr::Cos { arg: Box::new(Expr::Var { name: var }) }
    }

    pub fn tanh_of(var: Variable) -> Self {
        Expr::Tanh { arg: Box::new(Expr::Var { name: var }) }
    }
}

/// User-defined system with scalar slow and fast components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSystem {
    pub name: String,
    pub alpha1: f64,
    pub alpha2: f64,
    pub b: Expr,
    pub delta1: Expr,
    pub f: Expr,
    pub delta2: Expr,
    pub regularity: Regularity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// One of `D1`, `D2`, `OU`, `cubic`.
    Builtin {
        name: String,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    Custom(Box<CustomSystem>),
}

fn default_alpha() -> f64 {
    1.5
}

impl SystemSpec {
    pub fn builtin(name: &str) -> Self {
        SystemSpec::Builtin { name: name.into(), alpha: default_alpha() }
    }

    pub fn build(&self) -> Result<SlowFastSystem> {
        match self {
            SystemSpec::Builtin { name, alpha } => systems::builtin(name, *alpha),
            SystemSpec::Custom(c) => {
                for e in [&c.b, &c.delta1, &c.f, &c.delta2] {
                    e.validate()?;
                }
                if c.f.uses(Variable::T) || c.delta2.uses(Variable::T) {
                    return Err(Error::Config("fast coefficients may not depend on t".into()));
                }
                let (b, d1, f, d2) = (c.b.clone(), c.delta1.clone(), c.f.clone(), c.delta2.clone());
                let delta1 = if d1.uses(Variable::X) || d1.uses(Variable::Y) {
                    SlowNoise::State(Arc::new(move |t, x: &[f64], y: &[f64], out: &mut [f64]| out[0] = d1.eval(t, x[0], y[0])))
                } else {
                    SlowNoise::TimeOnly(Arc::new(move |t, out: &mut [f64]| out[0] = d1.eval(t, 0.0, 0.0)))
                };
                let sys = SlowFastSystem {
                    name: c.name.clone(),
                    d1: 1,
                    d2: 1,
                    alpha1: c.alpha1,
                    alpha2: c.alpha2,
                    b: Arc::new(move |t, x: &[f64], y: &[f64], out: &mut [f64]| out[0] = b.eval(t, x[0], y[0])),
                    delta1,
                    f: Arc::new(move |x: &[f64], y: &[f64], out: &mut [f64]| out[0] = f.eval(0.0, x[0], y[0])),
                    delta2: Arc::new(move |x: &[f64], y: &[f64], out: &mut [f64]| out[0] = d2.eval(0.0, x[0], y[0])),
                    regularity: c.regularity,
                };
                sys.validate()?;
                Ok(sys)
            }
        }
    }

    /// Name of a built-in system whose averaged coefficients are known in
    /// closed form.
    pub fn oracle_name(&self) -> Option<(&str, f64)> {
        match self {
            SystemSpec::Builtin { name, alpha } if name == "D1" || name == "D2" => Some((name.as_str(), *alpha)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AveragingMethod {
    /// Closed form when the system has one, otherwise a table.
    #[default]
    Auto,
    Oracle,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AveragingParams {
    pub method: AveragingMethod,
    pub grid: AveragingGrid,
    pub ergodic: ErgodicConfig,
}

impl Default for AveragingParams {
    fn default() -> Self {
        Self {
            method: AveragingMethod::Auto,
            grid: AveragingGrid::autonomous(vec![GridAxis { lo: -3.0, hi: 3.0, nodes: 25 }]),
            ergodic: ErgodicConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateParams {
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub epsilon: f64,
    pub replicas: usize,
    pub record_stride: usize,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self { x0: vec![0.0], y0: vec![0.0], t_end: 1.0, dt: 0.001, epsilon: 0.05, replicas: 1, record_stride: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrozenParams {
    pub x: Vec<f64>,
    pub y0: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub replicas: usize,
    pub record_stride: usize,
}

impl Default for FrozenParams {
    fn default() -> Self {
        Self { x: vec![0.0], y0: vec![0.0], t_end: 10.0, dt: 0.01, replicas: 1, record_stride: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErgodicParams {
    pub x: Vec<f64>,
    /// Observable in `y`.
    pub observable: Expr,
    pub ergodic: ErgodicConfig,
    pub y0: Vec<f64>,
    pub time_grid: Vec<f64>,
    /// Observable whose relaxation is fitted; `observable` when absent.
    pub decay_observable: Option<Expr>,
    /// Known invariant average of the decay observable; estimated when absent.
    pub g_bar: Option<f64>,
    pub transient: TransientConfig,
}

impl Default for ErgodicParams {
    fn default() -> Self {
        Self {
            x: vec![0.0],
            observable: Expr::cos_of(Variable::Y),
            ergodic: ErgodicConfig::default(),
            y0: vec![2.0],
            time_grid: (1..=8).map(|k| 0.25 * k as f64).collect(),
            decay_observable: Some(Expr::tanh_of(Variable::Y)),
            // tanh is odd and the default fast law is symmetric.
            g_bar: Some(0.0),
            transient: TransientConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrectorParams {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub observable: Expr,
    pub corrector: CorrectorConfig,
    /// Points for the finite-difference gradient probe (one-dimensional fast space).
    pub gradient_points: Vec<f64>,
    pub gradient_step: f64,
}

impl Default for CorrectorParams {
    fn default() -> Self {
        Self {
            x: vec![0.0],
            y: vec![0.0],
            observable: Expr::cos_of(Variable::Y),
            corrector: CorrectorConfig { t_max: Some(10.0), ..Default::default() },
            gradient_points: Vec::new(),
            gradient_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesParams {
    pub sweep: SweepConfig,
    pub averaging: AveragingParams,
    /// Test function of the weak sweep, in `x`.
    pub phi: Expr,
}

impl Default for RatesParams {
    fn default() -> Self {
        Self { sweep: SweepConfig::default(), averaging: AveragingParams::default(), phi: Expr::tanh_of(Variable::X) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryParams {
    pub dims: Vec<usize>,
    pub trials: usize,
    pub max_condition: f64,
    pub rel_tol: f64,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self { dims: vec![2, 3], trials: 200, max_condition: 10.0, rel_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingParams {
    pub x: Vec<f64>,
    pub psi: PsiParams,
    /// Defaults to `1/c₁`.
    pub a: Option<f64>,
    pub pairs: Vec<(f64, f64)>,
    pub quad_tol: f64,
    pub comparison_powers: Vec<f64>,
    pub comparison_r_max: f64,
    pub grid_points: usize,
}

impl Default for CouplingParams {
    fn default() -> Self {
        Self {
            x: vec![0.0],
            psi: PsiParams { c1: 3.0, c2: 60.0, l0: 1.0 },
            a: None,
            pairs: (0..20).map(|k| (0.3 * k as f64 - 2.0, 0.5 - 0.17 * k as f64)).collect(),
            quad_tol: 1e-12,
            comparison_powers: vec![1.0, 1.25, 2.0],
            comparison_r_max: 5.0,
            grid_points: 10_000,
        }
    }
}

/// Whole experiment file. Each subcommand reads its own section; absent
/// sections take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Defaults per subcommand when absent.
    pub system: Option<SystemSpec>,
    pub simulate: SimulateParams,
    pub frozen: FrozenParams,
    pub ergodic: ErgodicParams,
    pub corrector: CorrectorParams,
    pub rates_strong: RatesParams,
    pub rates_weak: RatesParams,
    pub geometry_check: GeometryParams,
    pub coupling_check: CouplingParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let weak = RatesParams {
            sweep: SweepConfig { replicas: 20_000, x0: vec![0.5], ..Default::default() },
            ..Default::default()
        };
        Self {
            schema_version: SCHEMA_VERSION,
            master_seed: 0,
            output_dir: None,
            system: None,
            simulate: SimulateParams::default(),
            frozen: FrozenParams::default(),
            ergodic: ErgodicParams::default(),
            corrector: CorrectorParams::default(),
            rates_strong: RatesParams::default(),
            rates_weak: weak,
            geometry_check: GeometryParams::default(),
            coupling_check: CouplingParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
