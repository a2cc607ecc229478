use thiserror::Error;

use crate::operator::BipartiteDims;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is {rows}x{cols} but dims {dims} require {expected}x{expected}")]
    ShapeMismatch {
        dims: BipartiteDims,
        rows: usize,
        cols: usize,
        expected: usize,
    },

    #[error("local dimensions must be positive, got {0}")]
    InvalidDims(BipartiteDims),

    #[error("operator is not Hermitian: |A - A^dagger| reaches {deviation:e} (tolerance {tolerance:e})")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("operands live on different spaces: {left} vs {right}")]
    DimsMismatch { left: BipartiteDims, right: BipartiteDims },

    #[error("total dimension {requested} exceeds the configured cap {cap} (raise it with --cap)")]
    DimensionCap { requested: usize, cap: usize },

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid measurement: {0}")]
    InvalidPovm(String),

    #[error("{what} needs {expected} items, got {got}")]
    WrongSize { what: &'static str, expected: usize, got: usize },

    #[error("index {value} is outside Z_{modulus}")]
    IndexOutOfRange { value: usize, modulus: usize },

    #[error("coarse-grained bin {index} has zero probability; the conditional state is undefined")]
    EmptyBin { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state is PPT (min eigenvalue of its partial transpose is {min_eigenvalue:e}); the construction needs an NPT state")]
    NotNpt { min_eigenvalue: f64 },

    #[error("enumeration of {requested} cases exceeds the limit {limit}")]
    EnumerationTooLarge { requested: u128, limit: u128 },

    #[error("precondition not asserted: {0}")]
    MissingAssertion(&'static str),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
