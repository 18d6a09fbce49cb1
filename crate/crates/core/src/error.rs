use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, TdError>;

#[derive(Debug, Error)]
pub enum TdError {
    #[error("point ({x1}, {x2}) lies outside the closed triangle")]
    OutOfDomain { x1: f64, x2: f64 },

    #[error("root solve did not converge: {0}")]
    NoConvergence(String),

    #[error("jacobian is singular at t={t}, a={a}")]
    SingularJacobian { t: f64, a: f64 },

    #[error("{0} is undefined at this argument")]
    DomainError(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature missed tolerance: estimate {estimate:e}, error {error:e}, tolerance {tolerance:e}")]
    QuadratureFailure {
        estimate: f64,
        error: f64,
        tolerance: f64,
    },

    #[error("degenerate denominator in correction term at a={0}")]
    DegenerateDenominator(f64),

    #[error("measures are unbalanced: totals {0} and {1}")]
    Unbalanced(f64, f64),

    #[error("discrete problem too large: {atoms} atoms (limit {limit})")]
    TooLarge { atoms: usize, limit: usize },

    #[error("grid file {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
