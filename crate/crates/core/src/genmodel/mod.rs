//! Generative stimulus model: categorical GLM plus residual components per
//! channel, identity sampling, controlled noise injection, and a procedural
//! renderer that turns coefficient vectors into stimulus grids under
//! viewpoint, illumination, scale, and translation.

mod design;
mod glm;
mod model;
mod planted;
mod render;
mod trialset;

pub use design::{build_design_matrix, FactorSpec};
pub use glm::{fit_glm, residual_pca};
pub use model::{
    fit_identity_model, inject_noise, population_std, sample_identity, synthesize_database,
    Channel, GlmIdentityModel, Identity, ModelPair, NoiseChannel, NoiseSpec, PopulationStd,
};
pub use planted::PlantedLayout;
pub use render::{
    render_stimulus, FeatureGeometry, RenderedStimulus, StimulusSpec, EXTRINSIC_GRID, GRID,
    MESH, SHAPE_DIMS, TEXTURE_DIMS, TEX_GRID,
};
pub use trialset::{coefficient_geometry, generate_trialset, FeatureSpace, TrialSet};
