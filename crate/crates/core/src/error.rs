//! Error type shared across the core crate.

use alloc::string::String;
use core::fmt;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// A parameter was outside its documented domain.
    InvalidParameter { name: &'static str, detail: String },
    /// A sequence had the wrong length for the operation.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// Rejection sampling gave up after the configured number of tries.
    SamplingFailed { tries: usize },
    /// A non-finite value surfaced in numeric code.
    NumericFailure { context: String },
    /// A configuration cannot be realised.
    InvalidConfig { detail: String },
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::InvalidParameter { name, detail } => {
                write!(f, "invalid parameter `{name}`: {detail}")
            }
            CoreError::DimensionMismatch {
                what,
                expected,
                got,
            } => write!(f, "dimension mismatch for {what}: expected {expected}, got {got}"),
            CoreError::SamplingFailed { tries } => {
                write!(f, "rejection sampling failed after {tries} tries")
            }
            CoreError::NumericFailure { context } => {
                write!(f, "non-finite value in {context}")
            }
            CoreError::InvalidConfig { detail } => write!(f, "invalid configuration: {detail}"),
        }
    }
}

impl core::error::Error for CoreError {}

pub type Result<T> = core::result::Result<T, CoreError>;
