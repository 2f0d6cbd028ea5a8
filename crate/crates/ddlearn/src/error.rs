//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of two operands are incompatible.
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A scalar argument left the function's domain (NaN or infinite).
    #[error("domain error: {0} must be finite")]
    NonFinite(&'static str),

    /// Invalid configuration or argument value.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A data file had an unrecognized magic number.
    #[error("bad magic number in {path}: got {got:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: String,
        got: u32,
        expected: u32,
    },

    /// A data file ended before its declared contents.
    #[error("truncated file {path}: needed {needed} bytes, had {had}")]
    Truncated {
        path: String,
        needed: usize,
        had: usize,
    },

    /// Image and label files disagree on sample count.
    #[error("count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    /// A delimited table row had the wrong number of fields.
    #[error("ragged row {row} in {path}: {got} fields, expected {expected}")]
    RaggedRow {
        path: String,
        row: usize,
        got: usize,
        expected: usize,
    },

    /// A delimited table cell failed to parse as a number.
    #[error("non-numeric cell at row {row}, column {col} in {path}: {cell:?}")]
    NonNumericCell {
        path: String,
        row: usize,
        col: usize,
        cell: String,
    },

    /// Loaded data contained NaN or infinity.
    #[error("non-finite value in {path} at sample {index}")]
    NonFiniteData { path: String, index: usize },

    /// Generic data validation failure (labels out of range, empty set, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Iterative solver failed to converge (unbounded or ill-posed problem).
    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    /// A numeric invariant broke mid-computation (non-finite objective, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Model file is malformed or from an unsupported version.
    #[error("bad model file {path}: {reason}")]
    BadModel { path: String, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
