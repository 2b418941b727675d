//! Lorentzian linear algebra on E⁴₁.

mod linalg;
mod vector;

pub use linalg::{least_squares, nullspace_min_singular, solve, svd4, LinearFit, NullspaceEstimate, Svd4, TIKHONOV};
pub use vector::{causal_character, lorentz_norm, metric, null_tolerance, CausalCharacter, Vec4, METRIC_DIAG};
