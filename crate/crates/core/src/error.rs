use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An exponent or geometry precondition of a check does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("sense-reversing point: J = {jacobian} at {point:?}")]
    NegativeJacobian { jacobian: f64, point: Vec<f64> },

    #[error("infinite local distortion at {point:?} (J = 0 but D_H f != 0)")]
    InfiniteDistortion { point: Vec<f64> },

    #[error("discretization failed: {0}")]
    Discretization(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("non-integrable sample: {0}")]
    NonIntegrable(String),

    #[error("mapping data unavailable: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag, written into report `reason` columns.
    pub fn reason(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Precondition(_) => "precondition",
            Error::NegativeJacobian { .. } => "negative_jacobian",
            Error::InfiniteDistortion { .. } => "infinite_distortion",
            Error::Discretization(_) => "discretization",
            Error::NonConvergence { .. } => "non_convergence",
            Error::NonIntegrable(_) => "non_integrable",
            Error::Unsupported(_) => "unsupported",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}
