use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared across the library.
///
/// `ConvergenceFailure` carries the best iterate found so callers can decide
/// whether a near-miss is usable; everything else is a hard error.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{context}: no convergence after {iterations} iterations (residual {residual:.3e})")]
    ConvergenceFailure {
        context: String,
        iterations: usize,
        residual: f64,
        /// Best iterate seen before the budget ran out.
        best: Vec<f64>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("infeasible model: {0}")]
    InfeasibleModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
