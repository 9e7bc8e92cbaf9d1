//! Error types shared across the crate.

use std::path::PathBuf;

/// Everything that can go wrong in this crate.
///
/// File-format problems carry the offending path; shape problems carry both
/// shapes so the message is self-explanatory.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Incompatible matrix shapes for an operation.
    #[error("{op}: shape mismatch, {lhs_rows}x{lhs_cols} vs {rhs_rows}x{rhs_cols}")]
    Shape {
        op: &'static str,
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },

    /// An index outside the valid range.
    #[error("{op}: index {index} out of range (bound {bound})")]
    Index {
        op: &'static str,
        index: usize,
        bound: usize,
    },

    /// A value-level argument violated its precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A model or experiment was assembled inconsistently.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An operation was called out of sequence (e.g. backward before forward).
    #[error("invalid call sequence: {0}")]
    State(String),

    /// A binary file did not start with the expected magic number.
    #[error("{path}: bad magic number, expected {expected:#010x}, found {found:#010x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    /// Unsupported container format version.
    #[error("{path}: unsupported format version {found} (expected {expected})")]
    BadVersion {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    /// A file ended before its declared payload.
    #[error("{path}: truncated, expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    /// Image and label files disagree on the sample count.
    #[error("{path}: count mismatch, {images} images vs {labels} labels")]
    CountMismatch {
        path: PathBuf,
        images: usize,
        labels: usize,
    },

    /// Any other structural problem in a data file.
    #[error("{path}: malformed: {reason}")]
    Malformed { path: PathBuf, reason: String },

    /// An I/O failure, annotated with the path involved.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
