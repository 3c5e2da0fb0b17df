//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. Variants carry enough context
//! (indices, expected/actual sizes) to diagnose a failure from the message
//! alone, which matters when errors are surfaced as machine-readable JSON by
//! the CLI.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient samples: need at least {need}, got {got}")]
    InsufficientSamples { need: usize, got: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("degenerate variables: {0}")]
    DegenerateVariables(String),

    #[error("insufficient permutations: need at least {need}, got {got}")]
    InsufficientPermutations { need: usize, got: usize },

    #[error("unknown level {level} for factor '{factor}' ({n_levels} levels declared)")]
    InvalidLevel {
        factor: String,
        level: usize,
        n_levels: usize,
    },

    #[error("rank-deficient design matrix: {0}")]
    RankDeficientDesign(String),

    #[error("invalid rank: {0}")]
    InvalidRank(String),

    #[error("invalid scale: {0}")]
    InvalidScale(String),

    #[error("invalid stimulus spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid network input: {0}")]
    InvalidInput(String),

    #[error("label {label} out of range for {n_classes} classes")]
    InvalidLabel { label: usize, n_classes: usize },

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("empty set: {0}")]
    EmptySet(String),

    #[error("degenerate row {index}: zero variance")]
    DegenerateRow { index: usize },

    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("degenerate map: {0}")]
    DegenerateMap(String),

    #[error("geometry mismatch: {0}")]
    InvalidGeometry(String),

    #[error("corrupt file {path}: {detail}")]
    CorruptFile { path: String, detail: String },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
