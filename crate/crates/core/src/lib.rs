//! Monte Carlo laboratory for slow-fast stochastic systems driven by
//! multiplicative isotropic α-stable noise.
//!
//! The crate is organised bottom-up:
//!
//! - [`stable_noise`]: exact samplers for symmetric and isotropic α-stable
//!   increments, the Lévy density and the small/large jump split.
//! - [`sphere_geometry`]: the immersion `F(ω̂) = A⁻¹ω̂/|A⁻¹ω̂|`, its tangent
//!   map, Jacobian determinant and the spherical density `H` induced by a
//!   jump coefficient.
//! - [`sde`]: coefficient model and explicit Euler integrators for the
//!   slow-fast system, the frozen equation and the averaged equation.
//! - [`ergodics`]: invariant-measure averages, averaged coefficients,
//!   ergodic decay fits, synchronous-coupling contraction and the corrector.
//! - [`coupling`]: the reflection map, the distance function `ψ` and the
//!   Lyapunov drift check.
//! - [`rates`]: ε-sweeps for strong and weak errors with log-log fits.
//! - [`cli`]: config-driven runner behind the `slowfast` binary.

// `!(a > b)` is used deliberately so that NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod coupling;
pub mod ergodics;
pub mod error;
pub mod quadrature;
pub mod rates;
pub mod replicas;
pub mod rng;
pub mod sde;
pub mod sphere_geometry;
pub mod stable_noise;
pub mod stats;
pub mod systems;

pub use error::{Error, Result};
pub use rng::{replica_rng, RandomSource};
