use thiserror::Error;

use crate::linalg::SolveReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("linear solver did not converge ({} iterations, relative residual {:.3e})", .0.iterations, .0.relative_residual)]
    SolverDiverged(SolveReport),

    #[error("point location failed for ({0}, {1})")]
    LocationFailed(f64, f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
