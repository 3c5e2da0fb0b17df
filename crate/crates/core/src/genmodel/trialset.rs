//! Trial generation: noisy exemplars rendered per (identity, viewpoint).

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::model::{inject_noise, Identity, ModelPair, NoiseSpec, PopulationStd};
use super::render::{
    render_stimulus, FeatureGeometry, StimulusSpec, GRID, MESH, SHAPE_DIMS, TEX_GRID,
    TEXTURE_DIMS,
};
use crate::error::{Error, Result};
use crate::exec;
use crate::seeding;

/// What the stimulus feature matrix S contains per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSpace {
    /// Rendered pixels, one feature per grid cell (the default).
    Pixels,
    /// Channel coefficients: shape then texture, located at control points
    /// and region centers.
    Coefficients,
}

/// Aligned per-trial data: stimulus features S with factor labels, the
/// rendered pixel grids that feed the classifier, and (once captured) the
/// layer activations L and decision variable R.
#[derive(Debug, Clone)]
pub struct TrialSet {
    /// n_trials x (n_features * dims_per_feature).
    pub s: Array2<f64>,
    pub dims_per_feature: usize,
    pub feature_space: FeatureSpace,
    pub geometry: FeatureGeometry,
    /// Rendered stimulus per trial, the classifier input.
    pub pixels: Vec<Array2<f64>>,
    pub identity_labels: Vec<usize>,
    pub viewpoint_labels: Vec<f64>,
    pub replicate_labels: Vec<usize>,
    /// Captured layer activations, n_trials x n_units.
    pub l: Option<Array2<f64>>,
    /// Decision variable (target logit), n_trials x 1.
    pub r: Option<Array2<f64>>,
}

impl TrialSet {
    pub fn n_trials(&self) -> usize {
        self.s.nrows()
    }

    pub fn activations(&self) -> Result<&Array2<f64>> {
        self.l
            .as_ref()
            .ok_or_else(|| Error::MissingInput("trial set has no captured activations".into()))
    }

    pub fn responses(&self) -> Result<&Array2<f64>> {
        self.r
            .as_ref()
            .ok_or_else(|| Error::MissingInput("trial set has no response variable".into()))
    }

    /// Row indices of trials at one viewpoint.
    pub fn viewpoint_rows(&self, viewpoint_deg: f64) -> Vec<usize> {
        self.viewpoint_labels
            .iter()
            .enumerate()
            .filter(|(_, &v)| (v - viewpoint_deg).abs() < 1e-9)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Feature locations for coefficient-space S: control points (dx then dy at
/// the same spot), then texture region centers.
pub fn coefficient_geometry() -> FeatureGeometry {
    let spacing = (GRID - 1) as f64 / (MESH - 1) as f64;
    let block = GRID / TEX_GRID;
    let mut coords = Vec::with_capacity(SHAPE_DIMS + TEXTURE_DIMS);
    for i in 0..MESH {
        for j in 0..MESH {
            let r = (i as f64 * spacing).round() as usize;
            let c = (j as f64 * spacing).round() as usize;
            coords.push((r, c));
            coords.push((r, c));
        }
    }
    for a in 0..TEX_GRID {
        for b in 0..TEX_GRID {
            coords.push((a * block + block / 2, b * block + block / 2));
        }
    }
    FeatureGeometry {
        grid_h: GRID,
        grid_w: GRID,
        coords,
    }
}

/// Render the full (identity, viewpoint, replicate) grid of noisy exemplars.
///
/// Trials are ordered identity-major, then viewpoint, then replicate. Each
/// trial injects channel noise with a seed split per trial index from
/// `noise.seed`, renders at neutral illumination/scale/translation, and
/// contributes one row of S.
pub fn generate_trialset(
    identities: &[Identity],
    viewpoints: &[f64],
    n_noisy_per_cell: usize,
    noise: &NoiseSpec,
    pair: &ModelPair,
    std: &PopulationStd,
    feature_space: FeatureSpace,
) -> Result<TrialSet> {
    if identities.is_empty() {
        return Err(Error::InvalidConfig("empty identity list".into()));
    }
    if viewpoints.is_empty() {
        return Err(Error::InvalidConfig("empty viewpoint list".into()));
    }
    if n_noisy_per_cell == 0 {
        return Err(Error::InvalidConfig(
            "n_noisy_per_cell must be >= 1".into(),
        ));
    }
    noise.validate()?;

    let n_vp = viewpoints.len();
    let reps = n_noisy_per_cell;
    let n_trials = identities.len() * n_vp * reps;

    let trials: Vec<Result<(Vec<f64>, Array2<f64>)>> = exec::map_indexed(n_trials, |t| {
        let vp_idx = (t / reps) % n_vp;
        let id_idx = t / (reps * n_vp);
        let trial_noise = NoiseSpec {
            seed: seeding::split_indexed(noise.seed, "trialset.noise", t as u64),
            ..noise.clone()
        };
        let noisy = inject_noise(&identities[id_idx], &trial_noise, std)?;
        let mut spec = StimulusSpec::neutral(noisy, viewpoints[vp_idx]);
        spec.noise = Some(trial_noise);
        let rendered = render_stimulus(&spec, pair)?;
        let row = match feature_space {
            FeatureSpace::Pixels => rendered.pixels.iter().copied().collect::<Vec<f64>>(),
            FeatureSpace::Coefficients => {
                let id = &rendered.spec.identity;
                let shape = pair
                    .shape
                    .identity_coefficients(&id.factor_levels, &id.shape_coeffs)?;
                let texture = pair
                    .texture
                    .identity_coefficients(&id.factor_levels, &id.texture_coeffs)?;
                shape.iter().chain(texture.iter()).copied().collect()
            }
        };
        Ok((row, rendered.pixels))
    });

    let n_cols = match feature_space {
        FeatureSpace::Pixels => GRID * GRID,
        FeatureSpace::Coefficients => SHAPE_DIMS + TEXTURE_DIMS,
    };
    let mut s = Array2::<f64>::zeros((n_trials, n_cols));
    let mut pixels = Vec::with_capacity(n_trials);
    let mut identity_labels = Vec::with_capacity(n_trials);
    let mut viewpoint_labels = Vec::with_capacity(n_trials);
    let mut replicate_labels = Vec::with_capacity(n_trials);
    for (t, item) in trials.into_iter().enumerate() {
        let (row, px) = item?;
        for (j, v) in row.into_iter().enumerate() {
            s[[t, j]] = v;
        }
        pixels.push(px);
        let rep = t % reps;
        let vp_idx = (t / reps) % n_vp;
        let id_idx = t / (reps * n_vp);
        identity_labels.push(identities[id_idx].id_label);
        viewpoint_labels.push(viewpoints[vp_idx]);
        replicate_labels.push(rep);
    }

    let geometry = match feature_space {
        FeatureSpace::Pixels => FeatureGeometry::pixel_grid(GRID, GRID),
        FeatureSpace::Coefficients => coefficient_geometry(),
    };

    Ok(TrialSet {
        s,
        dims_per_feature: 1,
        feature_space,
        geometry,
        pixels,
        identity_labels,
        viewpoint_labels,
        replicate_labels,
        l: None,
        r: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmodel::design::FactorSpec;
    use crate::genmodel::model::{
        fit_identity_model, population_std, sample_identity, synthesize_database, Channel,
        NoiseChannel,
    };
    use crate::seeding;
    use ndarray::Array2;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn fitted_pair(seed: u64) -> ModelPair {
        let spec = FactorSpec::new(vec![("g".into(), 2)], false).unwrap();
        let mut rng = seeding::rng(seed);
        let b_shape = Array2::from_shape_fn((2, SHAPE_DIMS), |_| {
            0.3 * rng.sample::<f64, _>(StandardNormal)
        });
        let b_tex = Array2::from_shape_fn((2, TEXTURE_DIMS), |_| {
            0.15 * rng.sample::<f64, _>(StandardNormal)
        });
        let (rows, db_shape) = synthesize_database(&spec, &b_shape, 40, 0.2, 1).unwrap();
        let (_, db_tex) = synthesize_database(&spec, &b_tex, 40, 0.1, 2).unwrap();
        ModelPair {
            shape: fit_identity_model(&spec, &rows, &db_shape, 6, Channel::Shape).unwrap(),
            texture: fit_identity_model(&spec, &rows, &db_tex, 6, Channel::Texture).unwrap(),
        }
    }

    fn some_identities(pair: &ModelPair, n: usize) -> Vec<Identity> {
        (0..n)
            .map(|i| sample_identity(pair, &[i % 2], 1.0, 50 + i as u64, i).unwrap())
            .collect()
    }

    #[test]
    fn trial_grid_counts_and_blocks() {
        let pair = fitted_pair(3);
        let ids = some_identities(&pair, 2);
        let std = population_std(&pair, 1.0);
        let noise = NoiseSpec {
            channel: NoiseChannel::Both,
            proportion: 0.8,
            seed: 7,
        };
        let vps = [-30.0, -15.0, 0.0, 15.0, 30.0];
        let ts = generate_trialset(&ids, &vps, 100, &noise, &pair, &std, FeatureSpace::Pixels)
            .unwrap();
        assert_eq!(ts.n_trials(), 1000);
        for vp in vps {
            assert_eq!(ts.viewpoint_rows(vp).len(), 200);
        }
        for t in 0..1000 {
            let rep = t % 100;
            let vp_idx = (t / 100) % 5;
            let id_idx = t / 500;
            assert_eq!(ts.replicate_labels[t], rep);
            assert_eq!(ts.viewpoint_labels[t], vps[vp_idx]);
            assert_eq!(ts.identity_labels[t], ids[id_idx].id_label);
        }
    }

    #[test]
    fn same_seed_bitwise_identical() {
        let pair = fitted_pair(4);
        let ids = some_identities(&pair, 2);
        let std = population_std(&pair, 1.0);
        let noise = NoiseSpec {
            channel: NoiseChannel::Texture,
            proportion: 0.8,
            seed: 11,
        };
        let vps = [0.0, 15.0];
        let a = generate_trialset(&ids, &vps, 5, &noise, &pair, &std, FeatureSpace::Pixels)
            .unwrap();
        let b = generate_trialset(&ids, &vps, 5, &noise, &pair, &std, FeatureSpace::Pixels)
            .unwrap();
        assert_eq!(a.s, b.s);
    }

    #[test]
    fn replicates_differ_under_noise() {
        let pair = fitted_pair(5);
        let ids = some_identities(&pair, 1);
        let std = population_std(&pair, 1.0);
        let noise = NoiseSpec {
            channel: NoiseChannel::Both,
            proportion: 0.8,
            seed: 13,
        };
        let ts = generate_trialset(&ids, &[0.0], 3, &noise, &pair, &std, FeatureSpace::Pixels)
            .unwrap();
        assert_ne!(ts.s.row(0), ts.s.row(1));
        assert_ne!(ts.s.row(1), ts.s.row(2));
    }

    /// Pair with no shape variation at all, so rendering never warps and
    /// texture effects stay axis-aligned.
    fn flat_shape_pair(seed: u64) -> ModelPair {
        let spec = FactorSpec::new(vec![("g".into(), 2)], false).unwrap();
        let mut rng = seeding::rng(seed);
        let b_shape = Array2::<f64>::zeros((2, SHAPE_DIMS));
        let b_tex = Array2::from_shape_fn((2, TEXTURE_DIMS), |_| {
            0.15 * rng.sample::<f64, _>(StandardNormal)
        });
        let (rows, db_shape) = synthesize_database(&spec, &b_shape, 40, 0.0, 1).unwrap();
        let (_, db_tex) = synthesize_database(&spec, &b_tex, 40, 0.1, 2).unwrap();
        ModelPair {
            shape: fit_identity_model(&spec, &rows, &db_shape, 6, Channel::Shape).unwrap(),
            texture: fit_identity_model(&spec, &rows, &db_tex, 6, Channel::Texture).unwrap(),
        }
    }

    #[test]
    fn texture_noise_changes_pixels_blockwise() {
        let pair = flat_shape_pair(6);
        let ids = some_identities(&pair, 1);
        let std = population_std(&pair, 1.0);
        let clean = NoiseSpec {
            channel: NoiseChannel::Texture,
            proportion: 0.0,
            seed: 17,
        };
        let noisy = NoiseSpec {
            proportion: 0.8,
            ..clean.clone()
        };
        let base = generate_trialset(&ids, &[0.0], 1, &clean, &pair, &std, FeatureSpace::Pixels)
            .unwrap();
        let hot = generate_trialset(&ids, &[0.0], 1, &noisy, &pair, &std, FeatureSpace::Pixels)
            .unwrap();
        let block = GRID / TEX_GRID;
        let mut per_region: Vec<Option<f64>> = vec![None; TEXTURE_DIMS];
        for r in 0..GRID {
            for c in 0..GRID {
                let region = (r / block) * TEX_GRID + (c / block);
                let diff = hot.pixels[0][[r, c]] - base.pixels[0][[r, c]];
                match per_region[region] {
                    None => per_region[region] = Some(diff),
                    Some(d) => assert!(
                        (diff - d).abs() < 1e-12,
                        "texture noise not block-constant at ({r}, {c})"
                    ),
                }
            }
        }
        assert!(per_region.iter().any(|d| d.unwrap().abs() > 1e-6));
    }

    #[test]
    fn coefficient_space_has_channel_layout() {
        let pair = fitted_pair(7);
        let ids = some_identities(&pair, 1);
        let std = population_std(&pair, 1.0);
        let noise = NoiseSpec {
            channel: NoiseChannel::Both,
            proportion: 0.4,
            seed: 19,
        };
        let ts = generate_trialset(
            &ids,
            &[0.0],
            2,
            &noise,
            &pair,
            &std,
            FeatureSpace::Coefficients,
        )
        .unwrap();
        assert_eq!(ts.s.ncols(), SHAPE_DIMS + TEXTURE_DIMS);
        assert_eq!(ts.geometry.coords.len(), SHAPE_DIMS + TEXTURE_DIMS);
        assert_eq!(ts.geometry.coords[0], ts.geometry.coords[1]);
    }

    #[test]
    fn empty_inputs_rejected() {
        let pair = fitted_pair(8);
        let ids = some_identities(&pair, 1);
        let std = population_std(&pair, 1.0);
        let noise = NoiseSpec {
            channel: NoiseChannel::Both,
            proportion: 0.8,
            seed: 23,
        };
        assert!(matches!(
            generate_trialset(&[], &[0.0], 1, &noise, &pair, &std, FeatureSpace::Pixels),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            generate_trialset(&ids, &[], 1, &noise, &pair, &std, FeatureSpace::Pixels),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            generate_trialset(&ids, &[0.0], 0, &noise, &pair, &std, FeatureSpace::Pixels),
            Err(Error::InvalidConfig(_))
        ));
    }
}
