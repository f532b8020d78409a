use thiserror::Error;

use crate::equilibrium::EquilibriumResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A kernel was evaluated at coincident points.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    /// The requested resolution cannot resolve some feature of the shape.
    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    /// The equilibrium solver hit its iteration cap. The best iterate found
    /// is carried along so callers can still inspect or export it.
    #[error("no convergence after {iterations} iterations (kkt residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Box<EquilibriumResult>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by bad inputs, as opposed to solver failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::InvalidParameter(_)
                | Error::InvalidShape(_)
                | Error::Resolution(_)
                | Error::Unsupported(_)
                | Error::ConstraintViolation(_)
                | Error::Json(_)
        )
    }
}
