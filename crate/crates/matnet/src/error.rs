//! Crate-wide error type.
//!
//! Variants are grouped by the exit-code classes the CLI reports:
//! configuration/ingestion problems, solver nonconvergence, and everything
//! else.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input data or configuration (CLI exit code 2).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// File parsing with location information (CLI exit code 2).
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Newton iteration failed to converge (CLI exit code 3).
    #[error("solver did not converge at step {step}: {detail}")]
    NonConvergence { step: usize, detail: String },

    /// Linear system could not be factorized (CLI exit code 3).
    #[error("singular linear system: {0}")]
    SingularSystem(String),

    /// Ensemble update failure (CLI exit code 3).
    #[error("history match failed: {0}")]
    HistoryMatch(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Exit code class for the CLI: 2 config/ingestion, 3 solver, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid(_) | Error::Parse { .. } => 2,
            Error::NonConvergence { .. } | Error::SingularSystem(_) | Error::HistoryMatch(_) => 3,
            Error::Io(_) | Error::Internal(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
