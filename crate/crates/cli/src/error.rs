use std::path::PathBuf;
use std::process::ExitCode;

use thiserror::Error;

/// Failures of a command, each tied to one exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Malformed { path: PathBuf, detail: String },
    /// The command ran to completion and reported a negative result.
    #[error("{0}")]
    Failed(String),
    #[error("{0}")]
    Budget(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Malformed { .. } => 2,
            CliError::Failed(_) => 3,
            CliError::Budget(_) => 4,
        })
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn malformed(path: impl Into<PathBuf>, detail: impl ToString) -> Self {
        CliError::Malformed {
            path: path.into(),
            detail: detail.to_string(),
        }
    }
}

impl From<robustkit::Error> for CliError {
    fn from(e: robustkit::Error) -> Self {
        use robustkit::Error as E;
        match e {
            E::InvalidArgument(_)
            | E::DimensionMismatch { .. }
            | E::NonFinite(_)
            | E::Bracket(_)
            | E::Unsupported(_) => CliError::Usage(e.to_string()),
            E::Budget { .. } | E::Numerical(_) | E::OracleContract(_) | E::InvalidPessimization { .. } => {
                CliError::Budget(e.to_string())
            }
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
