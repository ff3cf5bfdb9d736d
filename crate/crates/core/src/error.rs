//! Error type shared by all modules.

use std::fmt;

/// Errors raised by constructors and operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A weight was nonpositive or non-finite.
    InvalidWeight { index: usize, value: f64 },
    /// A score was non-finite.
    InvalidScore { index: usize, value: f64 },
    /// Paired arrays have different lengths.
    LengthMismatch { left: usize, right: usize },
    /// A probability-like quantity fell outside its valid range.
    InvalidProbability { name: &'static str, value: f64 },
    /// An index referred past the end of a collection.
    IndexOutOfRange { index: usize, len: usize },
    /// Any other parameter violation; the message names the parameter.
    InvalidParameter(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidWeight { index, value } => {
                write!(f, "weight at index {index} must be finite and > 0 (got {value})")
            }
            Error::InvalidScore { index, value } => {
                write!(f, "score at index {index} must be finite (got {value})")
            }
            Error::LengthMismatch { left, right } => {
                write!(f, "paired arrays have different lengths ({left} vs {right})")
            }
            Error::InvalidProbability { name, value } => {
                write!(f, "{name} must lie in its valid range (got {value})")
            }
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            Error::InvalidParameter(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for Error {}
