use std::fmt::Display;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] zass_core::Error),
    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn config(field: &str, msg: impl Display) -> Self {
        CliError::Config(format!("{field}: {msg}"))
    }

    pub fn io(path: &Path, err: impl Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::Io { .. } => 4,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
