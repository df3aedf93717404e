use std::path::PathBuf;

/// Errors raised across the solver pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("mesh validation failed: {0}")]
    Validation(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("factorization of {what} failed: {reason}")]
    Factorization { what: String, reason: String },

    /// A matrix that must be nonsingular by construction could not be
    /// factorized. This signals a violated invariant, not bad user input.
    #[error("well-posedness violated: {0}")]
    WellPosedness(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {relative_residual:.3e})")]
    NonConvergence {
        iterations: usize,
        relative_residual: f64,
    },

    #[error("operator is not positive definite: {0}")]
    SpdViolation(String),

    #[error("manufactured solution check failed: {0}")]
    ManufacturedSolution(String),

    #[error("state error: {0}")]
    State(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
