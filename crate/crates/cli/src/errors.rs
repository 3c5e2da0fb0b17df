//! Error-to-exit-code mapping and the machine-readable stderr payload.
//!
//! Exit codes group failures by what the caller should do about them:
//!   2  bad invocation (clap reports these itself)
//!   3  the request was well-formed but invalid: config schema violations,
//!      out-of-range settings, mismatched shapes
//!   4  a required input file or artifact is missing
//!   5  an input file exists but its contents are damaged
//!   6  the data is degenerate for the requested estimate
//!   7  training diverged
//!   1  everything else (I/O and similar)

use infolens_core::Error;

pub const EXIT_INVALID: i32 = 3;
pub const EXIT_MISSING_INPUT: i32 = 4;
pub const EXIT_CORRUPT: i32 = 5;
pub const EXIT_DEGENERATE: i32 = 6;
pub const EXIT_DIVERGED: i32 = 7;
pub const EXIT_OTHER: i32 = 1;

/// Exit code and a stable kind string for one error.
pub fn classify(err: &Error) -> (i32, &'static str) {
    match err {
        Error::InvalidConfig(_) => (EXIT_INVALID, "invalid-config"),
        Error::InvalidSpec(_) => (EXIT_INVALID, "invalid-spec"),
        Error::InvalidInput(_) => (EXIT_INVALID, "invalid-input"),
        Error::InvalidData(_) => (EXIT_INVALID, "invalid-data"),
        Error::InvalidScale(_) => (EXIT_INVALID, "invalid-scale"),
        Error::InvalidRank(_) => (EXIT_INVALID, "invalid-rank"),
        Error::InvalidLevel { .. } => (EXIT_INVALID, "invalid-level"),
        Error::InvalidLabel { .. } => (EXIT_INVALID, "invalid-label"),
        Error::InvalidGeometry(_) => (EXIT_INVALID, "invalid-geometry"),
        Error::InsufficientSamples { .. } => (EXIT_INVALID, "insufficient-samples"),
        Error::InsufficientPermutations { .. } => (EXIT_INVALID, "insufficient-permutations"),
        Error::RankDeficientDesign(_) => (EXIT_INVALID, "rank-deficient-design"),
        Error::EmptySet(_) => (EXIT_INVALID, "empty-set"),
        Error::MissingInput(_) => (EXIT_MISSING_INPUT, "missing-input"),
        Error::CorruptFile { .. } => (EXIT_CORRUPT, "corrupt-file"),
        Error::Json(_) => (EXIT_CORRUPT, "corrupt-json"),
        Error::DegenerateVariables(_) => (EXIT_DEGENERATE, "degenerate-variables"),
        Error::DegenerateMap(_) => (EXIT_DEGENERATE, "degenerate-map"),
        Error::DegenerateRow { .. } => (EXIT_DEGENERATE, "degenerate-row"),
        Error::NotPositiveDefinite(_) => (EXIT_DEGENERATE, "not-positive-definite"),
        Error::TrainingDiverged(_) => (EXIT_DIVERGED, "training-diverged"),
        Error::Io(_) => (EXIT_OTHER, "io"),
    }
}

/// One-line JSON error report for stderr.
pub fn error_json(err: &Error) -> String {
    let (code, kind) = classify(err);
    serde_json::json!({
        "error": {
            "exit_code": code,
            "kind": kind,
            "message": err.to_string(),
        }
    })
    .to_string()
}
