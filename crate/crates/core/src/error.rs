use thiserror::Error;

/// Errors shared by every module of the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible exponent polynomial: {0}")]
    InfeasibleExponent(String),

    /// The solver drifted toward the boundary of the feasible region.
    #[error("targets at or near the feasibility boundary: {0}")]
    NearBoundary(String),

    /// An iterative method ran out of budget; `best` carries the best value seen.
    #[error("no convergence after {iterations} iterations (best value {best})")]
    NonConvergence { iterations: usize, best: f64 },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::InfeasibleExponent(_) | Error::NearBoundary(_) => 2,
            Error::NonConvergence { .. } => 3,
            Error::Io(_) => 1,
        }
    }
}
