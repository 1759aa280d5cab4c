use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum AmvError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported strategy: {0}")]
    UnsupportedStrategy(String),

    #[error("unsupported volume mode: {0}")]
    UnsupportedMode(String),

    #[error("unsupported space: {0}")]
    UnsupportedSpace(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// The iterative eigensolver ran out of its iteration budget. The best
    /// residuals reached so far are carried along for diagnostics.
    #[error("eigensolver did not converge within {iterations} iterations (worst residual {worst_residual:.3e})")]
    ConvergenceFailure {
        iterations: usize,
        worst_residual: f64,
        residuals: Vec<f64>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, AmvError>;

impl AmvError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        AmvError::InvalidInput(msg.into())
    }
}
