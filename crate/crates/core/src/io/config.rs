//! Run configuration: one JSON document that pins an entire run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodel::{PlantedLayout, EXTRINSIC_GRID};
use crate::network::{NetSpec, TrainConfig};
use crate::seeding;

/// Stimulus-generation settings: the planted layout, identity count, and the
/// trial grids for training, mapping, and RDM analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub layout: PlantedLayout,
    pub n_identities: usize,
    /// Viewpoints for training and RDM trials; each must sit on the
    /// extrinsic grid.
    pub viewpoints: Vec<f64>,
    /// Sampling sigma behind the population stds.
    pub residual_sigma: f64,
    pub train_reps_per_cell: usize,
    pub train_noise_proportion: f64,
    /// Single viewpoint for map trials, where region blocks align with
    /// pixels exactly.
    pub map_viewpoint_deg: f64,
    pub map_trials: usize,
    pub map_noise_proportion: f64,
    pub rdm_reps_per_cell: usize,
    pub rdm_noise_proportion: f64,
}

/// Analysis settings shared by the map, RDM, and robustness stages.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// PCs retained for layer-PC maps, redundancy maps, and RDMs.
    pub n_pcs: usize,
    pub per_viewpoint_pc_maps: bool,
    pub bias_correct: bool,
    /// Permutations behind map thresholds; absent means unthresholded maps.
    pub n_permutations: Option<usize>,
    pub robustness_proportions: Vec<f64>,
    pub robustness_per_viewpoint: usize,
}

/// Split tag deriving the training seed from the run seed.
pub const TRAIN_SEED_TAG: &str = "stage.train";

/// Everything a run needs, schema-checked before any work starts. The global
/// seed expands into per-stage seeds through fixed tags, so stages re-run
/// independently and reproducibly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Provenance label: "desk", "smoke", or "custom".
    pub preset: String,
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub net: NetSpec,
    pub train: TrainConfig,
    pub analysis: AnalysisConfig,
}

impl RunConfig {
    /// Full desk-scale preset: 20 identities over the 5-viewpoint grid.
    /// Augmentation is kept gentle so every decision region stays in frame.
    pub fn desk(seed: u64) -> RunConfig {
        let train = TrainConfig {
            epochs: 12,
            learning_rate: 0.02,
            scale_range: (1.0, 1.08),
            translation_range: (0.0, 0.03),
            seed: seeding::split(seed, TRAIN_SEED_TAG),
            ..TrainConfig::default()
        };
        RunConfig {
            preset: "desk".into(),
            seed,
            generator: GeneratorConfig {
                layout: PlantedLayout::desk(),
                n_identities: 20,
                viewpoints: EXTRINSIC_GRID.to_vec(),
                residual_sigma: 1.0,
                train_reps_per_cell: 16,
                train_noise_proportion: 1.0,
                map_viewpoint_deg: 0.0,
                map_trials: 2000,
                map_noise_proportion: 1.0,
                rdm_reps_per_cell: 20,
                rdm_noise_proportion: 0.8,
            },
            net: NetSpec::desk(20),
            train,
            analysis: AnalysisConfig {
                n_pcs: 6,
                per_viewpoint_pc_maps: false,
                bias_correct: true,
                n_permutations: Some(200),
                robustness_proportions: vec![0.0, 0.4, 0.8, 2.0, 4.0],
                robustness_per_viewpoint: 20,
            },
        }
    }

    /// Minutes-to-seconds smoke preset: 4 identities, 2 viewpoints, no
    /// thresholds.
    pub fn smoke(seed: u64) -> RunConfig {
        let train = TrainConfig {
            epochs: 6,
            learning_rate: 0.02,
            scale_range: (1.0, 1.08),
            translation_range: (0.0, 0.03),
            seed: seeding::split(seed, TRAIN_SEED_TAG),
            ..TrainConfig::default()
        };
        RunConfig {
            preset: "smoke".into(),
            seed,
            generator: GeneratorConfig {
                layout: PlantedLayout::desk(),
                n_identities: 4,
                viewpoints: vec![-15.0, 15.0],
                residual_sigma: 1.0,
                train_reps_per_cell: 8,
                train_noise_proportion: 0.8,
                map_viewpoint_deg: 0.0,
                map_trials: 300,
                map_noise_proportion: 1.0,
                rdm_reps_per_cell: 8,
                rdm_noise_proportion: 0.8,
            },
            net: NetSpec::desk(4),
            train,
            analysis: AnalysisConfig {
                n_pcs: 4,
                per_viewpoint_pc_maps: false,
                bias_correct: true,
                n_permutations: None,
                robustness_proportions: vec![0.0, 1.0, 4.0],
                robustness_per_viewpoint: 5,
            },
        }
    }

    pub fn preset_by_name(name: &str, seed: u64) -> Result<RunConfig> {
        match name {
            "desk" => Ok(RunConfig::desk(seed)),
            "smoke" => Ok(RunConfig::smoke(seed)),
            other => Err(Error::InvalidConfig(format!(
                "unknown preset '{other}'; presets: desk, smoke"
            ))),
        }
    }

    pub fn from_json(json: &str) -> Result<RunConfig> {
        let config: RunConfig = serde_json::from_str(json)
            .map_err(|e| Error::InvalidConfig(format!("config schema: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.generator;
        g.layout.validate()?;
        if g.n_identities < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 identities, got {}",
                g.n_identities
            )));
        }
        if g.n_identities > g.layout.max_identities() {
            return Err(Error::InvalidConfig(format!(
                "{} identities exceed the layout's {} sign patterns",
                g.n_identities,
                g.layout.max_identities()
            )));
        }
        if self.net.n_classes != g.n_identities {
            return Err(Error::InvalidConfig(format!(
                "classifier has {} classes for {} identities",
                self.net.n_classes, g.n_identities
            )));
        }
        let on_grid = |v: f64| EXTRINSIC_GRID.iter().any(|&x| (v - x).abs() < 1e-9);
        if g.viewpoints.is_empty() {
            return Err(Error::InvalidConfig("no viewpoints".into()));
        }
        for &v in &g.viewpoints {
            if !on_grid(v) {
                return Err(Error::InvalidConfig(format!(
                    "viewpoint {v} is not on the {EXTRINSIC_GRID:?} grid"
                )));
            }
        }
        if !on_grid(g.map_viewpoint_deg) {
            return Err(Error::InvalidConfig(format!(
                "map viewpoint {} is not on the {EXTRINSIC_GRID:?} grid",
                g.map_viewpoint_deg
            )));
        }
        if !(g.residual_sigma > 0.0 && g.residual_sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "residual_sigma must be positive, got {}",
                g.residual_sigma
            )));
        }
        for (name, v) in [
            ("train_noise_proportion", g.train_noise_proportion),
            ("map_noise_proportion", g.map_noise_proportion),
            ("rdm_noise_proportion", g.rdm_noise_proportion),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("train_reps_per_cell", g.train_reps_per_cell),
            ("map_trials", g.map_trials),
            ("rdm_reps_per_cell", g.rdm_reps_per_cell),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }

        self.net.validate()?;
        self.train.validate()?;

        let a = &self.analysis;
        if a.n_pcs < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_pcs must be >= 2 (dissimilarity needs 2 score columns), got {}",
                a.n_pcs
            )));
        }
        if let Some(p) = a.n_permutations {
            if p < 100 {
                return Err(Error::InvalidConfig(format!(
                    "n_permutations must be >= 100 for a stable 95th percentile, got {p}"
                )));
            }
        }
        if a.robustness_proportions.is_empty() {
            return Err(Error::InvalidConfig("no robustness proportions".into()));
        }
        for &p in &a.robustness_proportions {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "robustness proportion must be finite and >= 0, got {p}"
                )));
            }
        }
        if a.robustness_per_viewpoint == 0 {
            return Err(Error::InvalidConfig(
                "robustness_per_viewpoint must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        RunConfig::desk(7).validate().unwrap();
        RunConfig::smoke(7).validate().unwrap();
    }

    #[test]
    fn preset_seed_expands_train_seed() {
        let a = RunConfig::desk(1);
        let b = RunConfig::desk(2);
        assert_ne!(a.train.seed, b.train.seed);
        assert_eq!(a.train.seed, RunConfig::desk(1).train.seed);
    }

    #[test]
    fn json_round_trip() {
        let config = RunConfig::desk(42);
        let json = config.to_json().unwrap();
        let back = RunConfig::from_json(&json).unwrap();
        assert_eq!(back.seed, 42);
        assert_eq!(back.generator.n_identities, 20);
        assert_eq!(back.net.n_classes, 20);
        assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn unknown_field_rejected() {
        let mut json = RunConfig::smoke(1).to_json().unwrap();
        json = json.replacen("\"seed\"", "\"sneaky\": 1,\n  \"seed\"", 1);
        match RunConfig::from_json(&json) {
            Err(Error::InvalidConfig(msg)) => assert!(msg.contains("sneaky"), "{msg}"),
            other => panic!("expected schema rejection, got {other:?}"),
        }
    }

    #[test]
    fn class_identity_mismatch_rejected() {
        let mut config = RunConfig::smoke(1);
        config.generator.n_identities = 3;
        assert!(matches!(
            config.validate(),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn off_grid_viewpoint_rejected() {
        let mut config = RunConfig::smoke(1);
        config.generator.viewpoints = vec![10.0];
        assert!(matches!(
            config.validate(),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn too_many_identities_rejected() {
        let mut config = RunConfig::desk(1);
        config.generator.n_identities = 65;
        config.net.n_classes = 65;
        assert!(matches!(
            config.validate(),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn small_permutation_count_rejected() {
        let mut config = RunConfig::desk(1);
        config.analysis.n_permutations = Some(50);
        assert!(matches!(
            config.validate(),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn unknown_preset_name_rejected() {
        assert!(matches!(
            RunConfig::preset_by_name("medium", 3),
            Err(Error::InvalidConfig(_))
        ));
    }
}
