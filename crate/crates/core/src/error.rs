use thiserror::Error;

/// Errors produced anywhere in the planning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a documented invariant (bad ids, negative rates, ...).
    #[error("validation error: {0}")]
    Validation(String),
    /// A vector or matrix has the wrong dimensions.
    #[error("shape error: {0}")]
    Shape(String),
    /// A model could not be built or modified as requested.
    #[error("model error: {0}")]
    Model(String),
    /// The LP backend failed in a way that is not a status (numerical trouble).
    #[error("solver error: {0}")]
    Solver(String),
    /// The model has no feasible point; the message names the offending group when known.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// A plan or solution is internally inconsistent.
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than by solving.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::Shape(_) | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
