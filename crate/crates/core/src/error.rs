use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension n = {n}: {reason}")]
    Dimension { n: usize, reason: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {estimate:e}, error {error:e})")]
    Quadrature {
        subdivisions: usize,
        estimate: f64,
        error: f64,
    },

    #[error("point lies outside the domain or on its boundary: {0}")]
    OutsideDomain(String),

    #[error("evaluation too close to the boundary (distance {distance:e})")]
    TooCloseToBoundary { distance: f64 },

    #[error(
        "Newton iteration failed after {iterations} iterations: {reason} (residual {residual:e})"
    )]
    Newton {
        iterations: usize,
        residual: f64,
        reason: String,
    },

    #[error("singular linear system at pivot {0}")]
    Singular(usize),

    #[error("minimization failed: {0}")]
    Minimization(String),

    #[error("fixed-point iteration did not contract: {0}")]
    NoContraction(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
