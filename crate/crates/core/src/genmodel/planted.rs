//! Planted ground-truth task for end-to-end validation.
//!
//! The texture channel is wired so that region roles are known by
//! construction: a set of decision regions whose intensities encode the
//! identity as a sign pattern, nuisance regions that vary trial to trial but
//! never separate identities, and constant regions that carry nothing at all.
//! Rendered at frontal view with zero shape coefficients, region boundaries
//! land exactly on pixel blocks, so every pixel's causal role is known and a
//! map can be scored against the truth.
//!
//! Each decision region owns a distinct contrast amplitude. A classifier
//! that ends in global average pooling keeps no position information, so a
//! shared amplitude would collapse permuted sign patterns into the same
//! pooled summary; distinct brightness bands keep every pattern separable
//! after pooling.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::design::FactorSpec;
use super::model::{Channel, GlmIdentityModel, Identity, ModelPair};
use super::render::{GRID, SHAPE_DIMS, TEXTURE_DIMS, TEX_GRID};
use crate::error::{Error, Result};

/// Region roles and noise scales for the planted task.
///
/// Texture residual components are unit vectors, one per non-constant
/// region: decision regions first (largest population std, keeping singular
/// values descending), then nuisance regions, both in ascending region
/// order. Identity texture coefficients are `±region_amplitude(k)` in the
/// decision slots and zero in the nuisance slots, so identities differ only
/// inside decision regions while injected noise moves both. Keeping
/// `nuisance_std` below `decision_std` keeps trialwise variance of the
/// network's decision variable owned by decision regions (pooled brightness
/// features mix every region, so nuisance noise leaks into every readout in
/// proportion to its std), and keeping it well below `amplitude` leaves the
/// decision brightness bands clear of nuisance excursions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedLayout {
    /// Regions whose intensity pattern defines the identity.
    pub decision_regions: Vec<usize>,
    /// Regions that vary across trials but are identical across identities.
    pub nuisance_regions: Vec<usize>,
    /// Population std of each decision coefficient; above `nuisance_std`.
    pub decision_std: f64,
    /// Population std of each nuisance coefficient; at most `decision_std`.
    pub nuisance_std: f64,
    /// Population std of the two shape coefficients.
    pub shape_std: f64,
    /// Contrast of the first decision region: its coefficient is
    /// `+amplitude` or `-amplitude` depending on the identity bit.
    pub amplitude: f64,
    /// Amplitude increment per decision region (ascending region order), so
    /// region ordinal k codes its bit at `amplitude + k * amplitude_step`.
    pub amplitude_step: f64,
}

impl PlantedLayout {
    /// Desk-scale default: 6 decision regions spread over the grid, 2
    /// nuisance regions, the remaining 8 constant.
    pub fn desk() -> PlantedLayout {
        PlantedLayout {
            decision_regions: vec![2, 5, 6, 9, 10, 13],
            nuisance_regions: vec![4, 11],
            decision_std: 0.01,
            nuisance_std: 0.005,
            shape_std: 0.05,
            amplitude: 0.1,
            amplitude_step: 0.064,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.decision_regions.is_empty() {
            return Err(Error::InvalidConfig("no decision regions".into()));
        }
        for &r in self.decision_regions.iter().chain(&self.nuisance_regions) {
            if r >= TEXTURE_DIMS {
                return Err(Error::InvalidConfig(format!(
                    "region {r} outside the {TEXTURE_DIMS}-region layout"
                )));
            }
        }
        let mut seen = vec![false; TEXTURE_DIMS];
        for &r in self.decision_regions.iter().chain(&self.nuisance_regions) {
            if seen[r] {
                return Err(Error::InvalidConfig(format!(
                    "region {r} assigned more than one role"
                )));
            }
            seen[r] = true;
        }
        if !(self.nuisance_std > 0.0 && self.decision_std >= self.nuisance_std) {
            return Err(Error::InvalidConfig(format!(
                "need decision_std >= nuisance_std > 0, got {} and {}",
                self.decision_std, self.nuisance_std
            )));
        }
        if !(self.shape_std > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "shape_std must be positive, got {}",
                self.shape_std
            )));
        }
        if !(self.amplitude > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        if !(self.amplitude_step >= 0.0 && self.amplitude_step.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "amplitude_step must be finite and >= 0, got {}",
                self.amplitude_step
            )));
        }
        Ok(())
    }

    /// Regions with neither role: constant intensity across all trials.
    pub fn constant_regions(&self) -> Vec<usize> {
        (0..TEXTURE_DIMS)
            .filter(|r| {
                !self.decision_regions.contains(r) && !self.nuisance_regions.contains(r)
            })
            .collect()
    }

    pub fn n_components(&self) -> usize {
        self.nuisance_regions.len() + self.decision_regions.len()
    }

    pub fn max_identities(&self) -> usize {
        1usize << self.decision_regions.len().min(usize::BITS as usize - 1)
    }

    /// Row-major pixel mask (GRID x GRID) covering the given regions.
    pub fn region_mask(regions: &[usize]) -> Vec<bool> {
        let block = GRID / TEX_GRID;
        let mut mask = vec![false; GRID * GRID];
        for &region in regions {
            let (r0, c0) = ((region / TEX_GRID) * block, (region % TEX_GRID) * block);
            for r in r0..r0 + block {
                for c in c0..c0 + block {
                    mask[r * GRID + c] = true;
                }
            }
        }
        mask
    }

    pub fn decision_mask(&self) -> Vec<bool> {
        Self::region_mask(&self.decision_regions)
    }

    pub fn nuisance_mask(&self) -> Vec<bool> {
        Self::region_mask(&self.nuisance_regions)
    }

    /// The planted model pair. Texture components are unit region vectors
    /// (nuisance then decision); the shape channel is flat: zero categorical
    /// effects and two low-variance components so shape noise stays a small
    /// perturbation.
    pub fn model_pair(&self) -> Result<ModelPair> {
        self.validate()?;
        let design = FactorSpec::new(vec![("cell".into(), 2)], false)?;
        let p = design.n_columns();

        let n_comp = self.n_components();
        let mut tex_components = Array2::<f64>::zeros((n_comp, TEXTURE_DIMS));
        let mut tex_sv = Vec::with_capacity(n_comp);
        let mut ordered_dec = self.decision_regions.clone();
        ordered_dec.sort_unstable();
        let mut ordered_nuis = self.nuisance_regions.clone();
        ordered_nuis.sort_unstable();
        for (i, &r) in ordered_dec.iter().enumerate() {
            tex_components[[i, r]] = 1.0;
            tex_sv.push(self.decision_std);
        }
        for (i, &r) in ordered_nuis.iter().enumerate() {
            tex_components[[ordered_dec.len() + i, r]] = 1.0;
            tex_sv.push(self.nuisance_std);
        }

        let mut shape_components = Array2::<f64>::zeros((2, SHAPE_DIMS));
        shape_components[[0, 0]] = 1.0;
        shape_components[[1, 1]] = 1.0;

        Ok(ModelPair {
            shape: GlmIdentityModel {
                design_coding: design.clone(),
                coefficients: Array2::zeros((p, SHAPE_DIMS)),
                residual_components: shape_components,
                residual_singular_values: vec![self.shape_std; 2],
                channel: Channel::Shape,
                n_database_rows: 1,
            },
            texture: GlmIdentityModel {
                design_coding: design,
                coefficients: Array2::zeros((p, TEXTURE_DIMS)),
                residual_components: tex_components,
                residual_singular_values: tex_sv,
                channel: Channel::Texture,
                n_database_rows: 1,
            },
        })
    }

    /// Slot of decision region `ordinal` (ascending order) in the texture
    /// coefficient vector.
    pub fn decision_slot(&self, ordinal: usize) -> usize {
        ordinal
    }

    /// Contrast amplitude of decision region `ordinal` (ascending order).
    pub fn region_amplitude(&self, ordinal: usize) -> f64 {
        self.amplitude + ordinal as f64 * self.amplitude_step
    }

    /// `n` identities coded as sign patterns: decision coefficient k of
    /// identity `id` is `+region_amplitude(k)` when bit k of `id` is set,
    /// else `-region_amplitude(k)`. Distinct identities therefore differ in
    /// at least one decision region by twice that region's amplitude.
    pub fn identities(&self, n: usize) -> Result<Vec<Identity>> {
        self.validate()?;
        if n == 0 {
            return Err(Error::InvalidConfig("need at least one identity".into()));
        }
        if n > self.max_identities() {
            return Err(Error::InvalidConfig(format!(
                "{n} identities exceed the {} sign patterns of {} decision regions",
                self.max_identities(),
                self.decision_regions.len()
            )));
        }
        let n_dec = self.decision_regions.len();
        let n_nuis = self.nuisance_regions.len();
        Ok((0..n)
            .map(|id| {
                let mut texture_coeffs = vec![0.0; n_dec + n_nuis];
                for k in 0..n_dec {
                    let a = self.region_amplitude(k);
                    texture_coeffs[k] = if (id >> k) & 1 == 1 { a } else { -a };
                }
                Identity {
                    factor_levels: vec![0],
                    shape_coeffs: vec![0.0; 2],
                    texture_coeffs,
                    id_label: id,
                }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmodel::model::{population_std, NoiseChannel, NoiseSpec};
    use crate::genmodel::render::{render_stimulus, StimulusSpec};
    use crate::genmodel::trialset::{generate_trialset, FeatureSpace};

    #[test]
    fn desk_layout_partitions_the_grid() {
        let layout = PlantedLayout::desk();
        layout.validate().unwrap();
        let dec = layout.decision_mask();
        let nuis = layout.nuisance_mask();
        let cons = PlantedLayout::region_mask(&layout.constant_regions());
        let mut total = 0usize;
        for i in 0..GRID * GRID {
            let roles = dec[i] as u8 + nuis[i] as u8 + cons[i] as u8;
            assert_eq!(roles, 1, "pixel {i} has {roles} roles");
            total += 1;
        }
        assert_eq!(total, 1024);
        assert_eq!(dec.iter().filter(|&&b| b).count(), 6 * 64);
        assert_eq!(nuis.iter().filter(|&&b| b).count(), 2 * 64);
    }

    #[test]
    fn identities_are_distinct_sign_patterns() {
        let layout = PlantedLayout::desk();
        let ids = layout.identities(20).unwrap();
        assert_eq!(ids.len(), 20);
        for (i, id) in ids.iter().enumerate() {
            assert_eq!(id.id_label, i);
            assert_eq!(id.shape_coeffs, vec![0.0; 2]);
            assert_eq!(id.texture_coeffs[6], 0.0);
            assert_eq!(id.texture_coeffs[7], 0.0);
            for (k, &c) in id.texture_coeffs[..6].iter().enumerate() {
                let a = 0.1 + 0.064 * k as f64;
                assert!(c == a || c == -a, "slot {k} of identity {i} = {c}");
            }
        }
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                assert_ne!(ids[i].texture_coeffs, ids[j].texture_coeffs);
            }
        }
    }

    #[test]
    fn decision_brightness_bands_are_disjoint() {
        let layout = PlantedLayout::desk();
        let mut levels: Vec<f64> = (0..layout.decision_regions.len())
            .flat_map(|k| {
                let a = layout.region_amplitude(k);
                [a, -a]
            })
            .collect();
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in levels.windows(2) {
            let gap = pair[1] - pair[0];
            assert!(
                gap >= 6.0 * layout.decision_std,
                "bands {} and {} closer than 6 noise stds",
                pair[0],
                pair[1]
            );
        }
        // nuisance excursions stay below the innermost band at 3 stds
        assert!(3.0 * layout.nuisance_std < layout.amplitude);
    }

    #[test]
    fn identity_count_capped_by_sign_patterns() {
        let layout = PlantedLayout::desk();
        assert_eq!(layout.max_identities(), 64);
        assert!(layout.identities(64).is_ok());
        assert!(matches!(
            layout.identities(65),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn clean_render_paints_roles_exactly() {
        let layout = PlantedLayout::desk();
        let pair = layout.model_pair().unwrap();
        let ids = layout.identities(8).unwrap();
        let out = render_stimulus(&StimulusSpec::neutral(ids[5].clone(), 0.0), &pair).unwrap();
        let block = GRID / TEX_GRID;
        for r in 0..GRID {
            for c in 0..GRID {
                let p = out.pixels[[r, c]];
                let region = (r / block) * TEX_GRID + (c / block);
                let want = match layout.decision_regions.iter().position(|&d| d == region) {
                    // identity 5 = bits 000101: ordinals 0 and 2 positive
                    Some(k) => {
                        let sign = if (5 >> k) & 1 == 1 { 1.0 } else { -1.0 };
                        0.5 + sign * layout.region_amplitude(k)
                    }
                    None => 0.5,
                };
                assert!((p - want).abs() < 1e-12, "pixel ({r}, {c}) = {p}, want {want}");
            }
        }
        // spot checks: region 2 at +0.1, region 5 at -0.164, region 6 at +0.228
        assert!((out.pixels[[4, 20]] - 0.6).abs() < 1e-12);
        assert!((out.pixels[[12, 12]] - 0.336).abs() < 1e-12);
        assert!((out.pixels[[12, 20]] - 0.728).abs() < 1e-12);
    }

    #[test]
    fn trialset_varies_roles_as_planted() {
        let layout = PlantedLayout::desk();
        let pair = layout.model_pair().unwrap();
        let ids = layout.identities(2).unwrap();
        let std = population_std(&pair, 1.0);
        assert_eq!(std.texture[0], 0.01);
        assert_eq!(std.texture[6], 0.005);
        let noise = NoiseSpec {
            channel: NoiseChannel::Texture,
            proportion: 1.0,
            seed: 5,
        };
        let trials = generate_trialset(
            &ids[..1],
            &[0.0],
            40,
            &noise,
            &pair,
            &std,
            FeatureSpace::Pixels,
        )
        .unwrap();
        assert_eq!(trials.n_trials(), 40);

        let mask_var = |mask: &[bool]| -> (f64, f64) {
            let mut min_v = f64::INFINITY;
            let mut max_v: f64 = 0.0;
            for (j, &m) in mask.iter().enumerate() {
                if !m {
                    continue;
                }
                let col = trials.s.column(j);
                let mean = col.sum() / col.len() as f64;
                let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
                    / (col.len() - 1) as f64;
                min_v = min_v.min(var);
                max_v = max_v.max(var);
            }
            (min_v, max_v)
        };
        let (dec_min, _) = mask_var(&layout.decision_mask());
        let (nuis_min, nuis_max) = mask_var(&layout.nuisance_mask());
        let (_, cons_max) = mask_var(&PlantedLayout::region_mask(&layout.constant_regions()));
        assert!(nuis_min > 0.0, "nuisance pixels must vary");
        assert!(dec_min > nuis_max, "decision noise dominates: {dec_min} vs {nuis_max}");
        assert_eq!(cons_max, 0.0, "constant regions must not vary");
    }

    #[test]
    fn texture_components_orthonormal_and_descending() {
        let layout = PlantedLayout::desk();
        let pair = layout.model_pair().unwrap();
        let comp = &pair.texture.residual_components;
        assert_eq!(comp.dim(), (8, TEXTURE_DIMS));
        let gram = comp.dot(&comp.t());
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-15);
            }
        }
        let sv = &pair.texture.residual_singular_values;
        for w in sv.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn overlapping_roles_rejected() {
        let mut layout = PlantedLayout::desk();
        layout.nuisance_regions = vec![5, 11];
        assert!(matches!(
            layout.model_pair(),
            Err(Error::InvalidConfig(_))
        ));
    }
}
