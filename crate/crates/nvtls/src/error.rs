use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by the command layer, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 1 usage, 2 numerical or search failure, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::NotFound(_) | CliError::Numerical(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

impl From<nvtls_core::Error> for CliError {
    fn from(e: nvtls_core::Error) -> Self {
        use nvtls_core::Error as E;
        match e {
            E::InvalidArgument(m) => CliError::Usage(m),
            E::NotFound(m) => CliError::NotFound(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}
