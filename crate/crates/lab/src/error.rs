use std::path::PathBuf;

use thiserror::Error;

/// Failures of the runner. [`LabError::exit_code`] maps them onto the
/// process exit status: 2 for bad input or configuration, 1 otherwise.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: unsupported format_version {found} (expected {expected})")]
    Version { path: PathBuf, found: u64, expected: u64 },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] rrm_core::Error),
    #[error("{0}")]
    Runtime(String),
}

impl LabError {
    pub fn config(msg: impl Into<String>) -> Self {
        LabError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Core(rrm_core::Error::Config(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
