//! Coefficient model and explicit Euler integrators for the slow-fast
//! system, the frozen equation and the averaged equation.
//!
//! All schemes freeze coefficients at the left endpoint and draw the
//! α-stable increments exactly over each step.

mod integrate;
mod system;

pub use integrate::*;
pub use system::*;
