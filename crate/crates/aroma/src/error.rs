//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes do not line up for the requested operation.
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    /// A non-finite value (NaN/Inf) was produced or supplied.
    #[error("numeric failure in {op}: {detail}")]
    Numeric { op: &'static str, detail: String },

    /// Invalid caller-provided data (labels out of range, mismatched runs, ...).
    #[error("invalid input for {op}: {detail}")]
    Input { op: &'static str, detail: String },

    /// Config text failed to parse; `line` is 1-based.
    #[error("config error at line {line}: {detail}")]
    Config { line: usize, detail: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn dimension(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub fn numeric(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Numeric {
            op,
            detail: detail.into(),
        }
    }

    pub fn input(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Input {
            op,
            detail: detail.into(),
        }
    }

    pub fn config(line: usize, detail: impl Into<String>) -> Self {
        Error::Config {
            line,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
