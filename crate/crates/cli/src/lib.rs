//! Command-line toolkit around `infolens-core`: planted-task generation,
//! classifier training, activation capture, information maps, RDMs, and
//! robustness sweeps, each stage writing a self-describing run directory.

pub mod errors;
pub mod pipeline;
pub mod store;

pub use errors::{classify, error_json};
pub use pipeline::{run_pipeline, PipelineResult, TrialStage, TARGET_IDENTITY};
pub use store::{fresh_run_dir, run_root, RUN_ROOT_ENV};
