use std::io;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("unsupported magic number {0:?}")]
    BadMagic(String),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("unsupported maxval {0} (must be 1..=255)")]
    UnsupportedMaxval(u32),

    #[error("truncated payload: expected {expected} samples, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("granulometry undefined: {0}")]
    DegenerateImage(String),

    #[error("ragged row at line {line}: expected {expected} cells, found {found}")]
    RaggedRow { line: usize, expected: usize, found: usize },

    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),

    #[error("non-numeric cell {value:?} at line {line}, column {column}")]
    NonNumeric { line: usize, column: usize, value: String },

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty feature mask")]
    EmptyMask,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// True for failures of the operating system rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        if err.is_io_error() {
            match err.into_kind() {
                csv::ErrorKind::Io(e) => Error::Io(e),
                other => Error::Csv(format!("{other:?}")),
            }
        } else {
            Error::Csv(err.to_string())
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
