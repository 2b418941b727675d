use thiserror::Error;

use crate::expr::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("evaluation fault at s = {s}: {reason}")]
    Eval { s: f64, reason: String },

    #[error("s = {s} lies outside the profile domain [{min}, {max}]")]
    OutOfDomain { s: f64, min: f64, max: f64 },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid step size: {0}")]
    InvalidStep(String),

    #[error("non-finite coordinate in vector {0:?}")]
    NonFinite([f64; 4]),

    #[error("integration aborted at s = {s}: gram residual {residual:e} exceeds {limit:e}")]
    GramDrift { s: f64, residual: f64, limit: f64 },

    #[error("quadrature did not converge on [{a}, {b}]: best estimate {estimate}, error estimate {error:e}")]
    Quadrature { a: f64, b: f64, estimate: f64, error: f64 },

    #[error("non-finite integrand value at s = {0}")]
    NonFiniteIntegrand(f64),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("degenerate axis: {0}")]
    DegenerateAxis(String),

    #[error("candidate sampled on {candidate} points, trace has {trace}")]
    GridMismatch { candidate: usize, trace: usize },

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::GramDrift { .. } | Error::Quadrature { .. } | Error::NonFiniteIntegrand(_) => 3,
            Error::Inconsistent(_) => 1,
            _ => 2,
        }
    }
}
