//! Information-theoretic feature mapping for small image classifiers.
//!
//! The crate connects four pieces: a gaussian-copula estimator for mutual
//! information and redundancy between continuous variables (`infotheory`), a
//! GLM-based generative model with a procedural 2D renderer (`genmodel`), a
//! compact residual classifier trained from scratch with exact activation
//! capture (`network`), and the analyses that tie them together into feature
//! maps, dissimilarity matrices, and robustness reports (`analysis`).
//! Supporting layers: dense linear algebra (`linalg`), deterministic seeding
//! (`seeding`), parallel-or-sequential execution (`exec`), and bit-exact
//! artifact persistence (`io`).
//!
//! All randomness flows from one `u64` seed through tagged splits, so every
//! artifact a run produces is reproducible byte for byte.

pub mod analysis;
pub mod error;
pub mod exec;
pub mod genmodel;
pub mod grid;
pub mod infotheory;
pub mod io;
pub mod linalg;
pub mod network;
pub mod seeding;

pub use error::{Error, Result};
