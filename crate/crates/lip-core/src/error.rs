//! Error type shared by every module in this crate.
//!
//! Variants are grouped into three classes so callers (notably the CLI) can
//! map failures onto process exit codes without matching every variant:
//! validation errors (bad input data or configuration), numerical errors
//! (a decomposition or solve could not be completed), and I/O errors.

use std::path::PathBuf;

/// Failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Io,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: file contains no rows")]
    EmptyMatrix { path: PathBuf },

    #[error("{path}: row {row} has {got} fields, expected {expected} (rows must have equal length)")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error("{path}: cannot parse {field:?} as a number at row {row}, column {col}")]
    ParseField {
        path: PathBuf,
        row: usize,
        col: usize,
        field: String,
    },

    #[error("non-finite value {value} at row {row}, column {col} of {context}")]
    NonFinite {
        context: String,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{context}: row {row} sums to {sum}, expected {expected}")]
    RowSum {
        context: String,
        row: usize,
        sum: f64,
        expected: String,
    },

    #[error("{context}: entry at row {row}, column {col} is {value}, expected one of {allowed}")]
    EntryDomain {
        context: String,
        row: usize,
        col: usize,
        value: f64,
        allowed: String,
    },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("invalid JSON in {path}: {message}")]
    Json { path: PathBuf, message: String },

    #[error("cannot corrupt labels: flipping to a different class requires at least two classes")]
    ImpossibleFlip,

    #[error("label corruption: row {row} still violated its constraint after {attempts} redraws")]
    RedrawLimit { row: usize, attempts: usize },

    #[error(
        "gram matrix X'X + {lambda}*I is not positive definite \
         (smallest eigenvalue approximately {lambda_min:.6e}); increase lambda"
    )]
    NotPositiveDefinite { lambda: f64, lambda_min: f64 },

    #[error("matrix columns are not orthonormal: max deviation {deviation:.6e} exceeds {tol:.1e}")]
    NotOrthonormal { deviation: f64, tol: f64 },

    #[error("spectral gap must be positive, got {gap}")]
    NonPositiveGap { gap: f64 },

    #[error("numerical routine failed: {0}")]
    Decomposition(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::NotPositiveDefinite { .. }
            | Error::NonPositiveGap { .. }
            | Error::Decomposition(_) => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
