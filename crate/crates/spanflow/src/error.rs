//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input or configuration; the caller can fix it and retry.
    Validation,
    /// Failure while executing an otherwise valid request.
    Runtime,
}

#[derive(Debug, Error)]
pub enum SpanflowError {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what} at {path}: {detail}")]
    Parse {
        what: &'static str,
        path: PathBuf,
        detail: String,
    },

    #[error("span has no tokens")]
    EmptySpan,

    #[error("attention row for vertex {vertex} is degenerate (|denominator| < {limit:e})")]
    DegenerateAttentionRow { vertex: usize, limit: f64 },

    #[error("non-finite loss in batch {batch_id} at pair {pair_index}")]
    NonFiniteLoss { batch_id: String, pair_index: usize },

    #[error("{0}")]
    Runtime(String),
}

impl SpanflowError {
    pub fn validation(msg: impl Into<String>) -> Self {
        SpanflowError::Validation(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        SpanflowError::Runtime(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SpanflowError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            SpanflowError::Validation(_) | SpanflowError::EmptySpan => ErrorKind::Validation,
            SpanflowError::Parse { .. } => ErrorKind::Validation,
            _ => ErrorKind::Runtime,
        }
    }
}

pub type Result<T> = std::result::Result<T, SpanflowError>;
