//! Interpretation pipeline over trial sets: information feature maps,
//! per-identity representational dissimilarity, and noise robustness sweeps.

mod maps;
mod rdm;
mod robustness;

pub use maps::{
    decision_redundancy_maps, diagnostic_map, layer_pc_maps, viewpoint_consistency,
    ConsistencyReport, FeatureMap, MapConfig, MapKind, ThresholdSpec,
};
pub use rdm::{rdm_pipeline, RdmAnalysis, DEFAULT_RDM_PCS};
pub use robustness::{noise_robustness_test, RobustnessConfig, RobustnessReport};
