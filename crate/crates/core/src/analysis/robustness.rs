//! Identification accuracy under graded coefficient noise on one channel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodel::{
    generate_trialset, FeatureSpace, Identity, ModelPair, NoiseChannel, NoiseSpec,
    PopulationStd, EXTRINSIC_GRID,
};
use crate::network::{classify, NetSpec, Params};
use crate::seeding;

/// Sweep settings: which noise proportions to test and how many stimuli to
/// render per (proportion, viewpoint) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustnessConfig {
    /// Noise std as multiples of the population std; 0 means clean.
    pub proportions: Vec<f64>,
    pub viewpoints: Vec<f64>,
    pub n_per_viewpoint: usize,
    pub seed: u64,
}

impl Default for RobustnessConfig {
    fn default() -> RobustnessConfig {
        RobustnessConfig {
            proportions: vec![0.0, 0.4, 0.8, 2.0, 4.0],
            viewpoints: EXTRINSIC_GRID.to_vec(),
            n_per_viewpoint: 20,
            seed: 0,
        }
    }
}

impl RobustnessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.proportions.is_empty() {
            return Err(Error::InvalidConfig("no noise proportions".into()));
        }
        for &p in &self.proportions {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "noise proportion must be finite and >= 0, got {p}"
                )));
            }
        }
        if self.viewpoints.is_empty() {
            return Err(Error::InvalidConfig("no viewpoints".into()));
        }
        if self.n_per_viewpoint == 0 {
            return Err(Error::InvalidConfig(
                "n_per_viewpoint must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Accuracy per proportion, with the per-stimulus hit flags behind each one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub channel: NoiseChannel,
    pub target_id: usize,
    pub proportions: Vec<f64>,
    /// Fraction of stimuli classified as the target, one per proportion.
    pub accuracies: Vec<f64>,
    /// flags[i][t]: stimulus t at proportion i was classified as the target.
    pub flags: Vec<Vec<bool>>,
}

impl RobustnessReport {
    /// Whether accuracy never rises as noise grows. A statistical tendency,
    /// not an invariant: single runs can wiggle at small sample sizes.
    pub fn non_increasing(&self) -> bool {
        self.accuracies.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Render noisy variants of one identity at each proportion, classify them,
/// and record how often the network still answers with that identity.
///
/// Proportion `i` uses its own noise seed split from `config.seed`, so the
/// sweep is reproducible as a whole and per entry.
pub fn noise_robustness_test(
    spec: &NetSpec,
    params: &Params,
    pair: &ModelPair,
    identity: &Identity,
    std: &PopulationStd,
    channel: NoiseChannel,
    config: &RobustnessConfig,
) -> Result<RobustnessReport> {
    config.validate()?;
    let target = identity.id_label;
    if target >= spec.n_classes {
        return Err(Error::InvalidLabel {
            label: target,
            n_classes: spec.n_classes,
        });
    }

    let mut accuracies = Vec::with_capacity(config.proportions.len());
    let mut flags = Vec::with_capacity(config.proportions.len());
    for (i, &proportion) in config.proportions.iter().enumerate() {
        let noise = NoiseSpec {
            channel,
            proportion,
            seed: seeding::split_indexed(config.seed, "robustness.noise", i as u64),
        };
        let trials = generate_trialset(
            std::slice::from_ref(identity),
            &config.viewpoints,
            config.n_per_viewpoint,
            &noise,
            pair,
            std,
            FeatureSpace::Pixels,
        )?;
        let preds = classify(spec, params, &trials.pixels)?;
        let hit: Vec<bool> = preds.iter().map(|&p| p == target).collect();
        accuracies.push(hit.iter().filter(|&&h| h).count() as f64 / hit.len() as f64);
        flags.push(hit);
    }

    Ok(RobustnessReport {
        channel,
        target_id: target,
        proportions: config.proportions.clone(),
        accuracies,
        flags,
    })
}
