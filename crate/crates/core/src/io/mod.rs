//! Artifact persistence: IMAT1 matrices, JSON manifests and run configs,
//! and deterministic SVG heatmaps. All writes are atomic
//! (write-temp-then-rename).

mod config;
mod imat;
mod manifest;
mod svg;

pub use config::{AnalysisConfig, GeneratorConfig, RunConfig, TRAIN_SEED_TAG};
pub use imat::{
    atomic_write, matrix_from_bytes, matrix_to_bytes, read_matrix, write_matrix,
    IMAT_HEADER_LEN, IMAT_MAGIC, IMAT_VERSION,
};
pub use manifest::{sha256_hex, FileRole, Manifest, ManifestEntry, MANIFEST_NAME};
pub use svg::{
    svg_heatmap_string, svg_matrix_string, write_svg_heatmap, write_svg_rdm, Colormap,
};
