use thiserror::Error;

use crate::linalg::Vector;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite function value at probe point {index} (step {step:e})")]
    ProbeFailure { index: usize, step: f64 },

    #[error("prox parameter {nu} is not below 1/rho = {limit} (rho = {rho})")]
    NonconvexSubproblem { nu: f64, rho: f64, limit: f64 },

    /// The iteration budget ran out before the requested accuracy was certified.
    /// `best` is the most accurate point seen and `achieved` its certificate.
    #[error("budget of {budget} iterations exceeded (achieved {achieved:e}, wanted {target:e})")]
    BudgetExceeded {
        best: Vector,
        achieved: f64,
        target: f64,
        budget: usize,
    },

    #[error("invalid modulus {0}: must be positive")]
    InvalidModulus(f64),

    #[error("oracle failure at {context}: {detail}")]
    OracleFailure { context: String, detail: String },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
