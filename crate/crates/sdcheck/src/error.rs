use std::io;
use std::path::PathBuf;

use sdcheck_core::Error;

/// Failures mapped onto the process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad instance spec, instance file or configuration (exit 2).
    #[error("{0}")]
    Invalid(String),
    /// The solver could not finish (exit 3).
    #[error("{0}")]
    Solver(String),
    /// Reading or writing a file failed (exit 4).
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    /// Facial reduction did not terminate (exit 5).
    #[error("{0}")]
    Diverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Diverged(_) => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidMatrix
            | Error::InvalidDimension { .. }
            | Error::InfeasibleAffine { .. }
            | Error::NotSurjective { .. }
            | Error::InvalidSpec(_)
            | Error::GenFailed
            | Error::OutOfDomain
            | Error::InvalidConfig(_)
            | Error::CertificateMismatch(_) => CliError::Invalid(msg),
            Error::FrDiverged { .. } => CliError::Diverged(msg),
            _ => CliError::Solver(msg),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
