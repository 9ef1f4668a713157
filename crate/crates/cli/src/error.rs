use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("invariant failure: {0}")]
    Invariant(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 2 validation, 3 invariant failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

impl From<autobid::Error> for CliError {
    fn from(e: autobid::Error) -> Self {
        match e {
            autobid::Error::InvariantViolation(msg) => CliError::Invariant(msg),
            other => CliError::Validation(vec![other.to_string()]),
        }
    }
}
