//! Partially null and pseudo null curves in Minkowski 4-space: synthesis from
//! curvatures, k-type slant helix classification, and constant-axis checks.

pub mod calculus;
pub mod classifier;
pub mod error;
pub mod expr;
pub mod frame;
pub mod integrator;
pub mod minkowski;
pub mod profile;
pub mod pseudohyperbolic;
pub mod sweep;
pub mod verifier;

pub use error::{Error, Result};
