use std::path::PathBuf;

use lpp_core::LppError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or arguments, found before any computation.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    /// A file could be read but its contents are malformed.
    #[error("{path}: {message} (at byte offset {offset})")]
    Format { path: PathBuf, offset: u64, message: String },

    #[error(transparent)]
    Core(#[from] LppError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.into(), message: err.to_string() }
    }

    pub fn format(path: impl Into<PathBuf>, offset: u64, message: impl Into<String>) -> Self {
        CliError::Format { path: path.into(), offset, message: message.into() }
    }

    /// Process exit code: 2 for problems found before computing, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_validation() => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
