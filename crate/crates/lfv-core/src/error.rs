use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("degree {got} exceeds the supported maximum {max}")]
    DegreeOverflow { got: usize, max: usize },
    #[error("no convergence: {message} (residual {residual:e})")]
    NonConvergence { message: String, residual: f64 },
    #[error("malformed measure document: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of a numerical method, as opposed to bad input.
    pub fn is_non_convergence(&self) -> bool {
        matches!(self, Error::NonConvergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
