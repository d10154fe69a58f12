use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode {mode} out of range for a tensor of order {order}")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid rank {0}: ranks must be at least 1")]
    InvalidRank(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("partition plan has no stages")]
    EmptyPlan,

    #[error("input contains non-finite values")]
    NonFinite,

    #[error("reference tensor has zero Frobenius norm")]
    ZeroNorm,

    #[error("bad magic at byte 0: expected {expected:?}, found {found:?}")]
    BadMagic { expected: &'static str, found: String },

    #[error("malformed header at byte {offset}: {msg}")]
    MalformedHeader { offset: usize, msg: String },

    #[error("truncated payload at byte {offset}: expected {expected} bytes, found {actual}")]
    Truncated {
        offset: usize,
        expected: usize,
        actual: usize,
    },

    #[error("payload mismatch at byte {offset}: {extra} trailing bytes after the declared payload")]
    TrailingBytes { offset: usize, extra: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the command-line driver: 1 for parse and
    /// IO failures, 2 for dimension or partition validation, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::BadMagic { .. }
            | Error::MalformedHeader { .. }
            | Error::Truncated { .. }
            | Error::TrailingBytes { .. }
            | Error::Parse(_)
            | Error::Io { .. } => 1,
            Error::ModeOutOfRange { .. }
            | Error::InvalidPartition(_)
            | Error::DimensionMismatch(_)
            | Error::InvalidShape(_)
            | Error::InvalidRank(_)
            | Error::InvalidConfig(_)
            | Error::EmptyPlan => 2,
            Error::NonFinite | Error::ZeroNorm => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
