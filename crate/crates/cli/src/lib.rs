//! Persistence and presentation for the crashcoach training framework:
//! CSV schemas, binary checkpoints, trajectory JSON dumps, ASCII trajectory
//! renders, plain-text run configs and the command implementations behind
//! the `crashcoach` binary.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod csv_io;
pub mod render;
pub mod trajectory;

use std::fmt;

use crashcoach_core::CoreError;

/// Errors surfaced by file formats and commands.
#[derive(Debug)]
pub enum CliError {
    Io(std::io::Error),
    Core(CoreError),
    Json(serde_json::Error),
    /// Malformed text file; `line` is 1-based.
    Parse { line: usize, detail: String },
    Checkpoint(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Json(e) => write!(f, "{e}"),
            CliError::Parse { line, detail } => write!(f, "line {line}: {detail}"),
            CliError::Checkpoint(detail) => write!(f, "checkpoint: {detail}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Json(e)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
