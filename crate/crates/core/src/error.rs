use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid delay: {0}")]
    Delay(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// `UᵀA₀V` is singular to working precision, so the algebraic part does not
    /// determine the constrained variables.
    #[error("assumption violated: U^T A0 V is singular (smallest singular value {smallest_singular_value:e})")]
    AssumptionViolation { smallest_singular_value: f64 },

    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),

    #[error("no feasible point found: {0}")]
    Infeasible(String),

    #[error("document error: {0}")]
    Document(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
