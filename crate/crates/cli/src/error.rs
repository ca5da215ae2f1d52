//! Error type carrying the documented process exit codes.
//!
//! 2: I/O failure during dataset preparation; 3: dataset or schedule
//! validation failure; 4: checkpoint mismatch; 5: ablation/parameter
//! mismatch. Success is always 0.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("I/O error: {0}")]
    Io(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),
    #[error("ablation mismatch: {0}")]
    Ablation(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Checkpoint(_) => 4,
            CliError::Ablation(_) => 5,
            CliError::Other(_) => 1,
        }
    }

    pub fn io(e: impl std::fmt::Display, path: &std::path::Path) -> Self {
        CliError::Io(format!("{e} ({})", path.display()))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
