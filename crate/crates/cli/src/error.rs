use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by the commands. Each maps to a fixed process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no estimate exists: {0}")]
    Existence(String),
    #[error("solver failed: {0}")]
    Solver(String),
}

impl CliError {
    pub fn input(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Input { path: path.into(), message: message.to_string() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Existence(_) => 2,
            _ => 1,
        }
    }
}
