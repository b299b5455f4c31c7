//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("label {label} at row {row} is out of range for {num_classes} classes")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        num_classes: usize,
    },

    #[error("fewer than two classes present in the data")]
    TooFewClasses,

    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("non-finite influence score at index {index}")]
    NonFiniteScore { index: usize },

    #[error("index {index} out of bounds for length {len}")]
    IndexOutOfBounds { index: usize, len: usize },

    #[error(
        "conjugate gradient did not reach tolerance: relative residual {achieved:.3e} > {required:.3e} after {iters} iterations"
    )]
    CgDidNotConverge {
        achieved: f64,
        required: f64,
        iters: usize,
    },

    #[error("dataset has no group attribute")]
    MissingGroups,

    #[error("group {group} has no members")]
    EmptyGroup { group: u8 },

    #[error("linear program infeasible: best feasibility residual {residual:.3e}")]
    LpInfeasible { residual: f64 },

    #[error("linear program solver failed: {0}")]
    LpFailed(String),

    #[error("all effective sample weights are zero")]
    ZeroEffectiveWeights,

    #[error("schema violation at {location}: {message}")]
    Schema { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
