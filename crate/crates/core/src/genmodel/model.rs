//! The fitted identity model: GLM coefficients plus residual components,
//! one per channel, with identity sampling and controlled noise injection.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::design::{build_design_matrix, FactorSpec};
use super::glm::{fit_glm, residual_pca};
use crate::error::{Error, Result};
use crate::seeding;

/// The two coefficient channels of a stimulus: geometry and surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Shape,
    Texture,
}

/// Which channel(s) noise injection perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseChannel {
    Shape,
    Texture,
    Both,
}

impl NoiseChannel {
    pub fn touches(self, channel: Channel) -> bool {
        match self {
            NoiseChannel::Shape => channel == Channel::Shape,
            NoiseChannel::Texture => channel == Channel::Texture,
            NoiseChannel::Both => true,
        }
    }
}

/// Diagonal Gaussian noise on residual coefficients: per-coefficient std is
/// `proportion` times the population std of that coefficient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub channel: NoiseChannel,
    /// Std multiplier; 0 renders noise a no-op (clean stimuli).
    pub proportion: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.proportion.is_finite() || self.proportion < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noise proportion must be finite and >= 0, got {}",
                self.proportion
            )));
        }
        Ok(())
    }
}

/// Fitted generative model for one channel: categorical effects B plus
/// orthonormal residual components spanning identity space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlmIdentityModel {
    pub design_coding: FactorSpec,
    /// n_design_cols x n_coeff_dims.
    pub coefficients: Array2<f64>,
    /// n_pcs x n_coeff_dims, orthonormal rows.
    pub residual_components: Array2<f64>,
    /// Descending, one per residual component.
    pub residual_singular_values: Vec<f64>,
    pub channel: Channel,
    /// Database rows behind the fit; sets the score-to-std scaling.
    pub n_database_rows: usize,
}

impl GlmIdentityModel {
    /// Population std of residual coefficient k at a given sampling sigma.
    pub fn coeff_std(&self, residual_sigma: f64, k: usize) -> f64 {
        residual_sigma * self.residual_singular_values[k] / (self.n_database_rows as f64).sqrt()
    }

    pub fn n_pcs(&self) -> usize {
        self.residual_components.nrows()
    }

    pub fn n_coeff_dims(&self) -> usize {
        self.residual_components.ncols()
    }

    /// Full coefficient vector of an identity in this channel: categorical
    /// cell mean plus residual coefficients mapped through the components.
    pub fn identity_coefficients(
        &self,
        factor_levels: &[usize],
        residual_coeffs: &[f64],
    ) -> Result<Array1<f64>> {
        if residual_coeffs.len() != self.n_pcs() {
            return Err(Error::InvalidInput(format!(
                "{} residual coefficients for a model with {} components",
                residual_coeffs.len(),
                self.n_pcs()
            )));
        }
        let row = self.design_coding.design_row(factor_levels)?;
        let mut out = Array1::<f64>::zeros(self.n_coeff_dims());
        for (p, w) in row.iter().enumerate() {
            if *w != 0.0 {
                out.scaled_add(*w, &self.coefficients.row(p));
            }
        }
        for (k, c) in residual_coeffs.iter().enumerate() {
            if *c != 0.0 {
                out.scaled_add(*c, &self.residual_components.row(k));
            }
        }
        Ok(out)
    }
}

/// Shape and texture models fitted on the same factor structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelPair {
    pub shape: GlmIdentityModel,
    pub texture: GlmIdentityModel,
}

/// One generated identity: its factor cell and residual coefficients per
/// channel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Identity {
    pub factor_levels: Vec<usize>,
    pub shape_coeffs: Vec<f64>,
    pub texture_coeffs: Vec<f64>,
    pub id_label: usize,
}

/// Per-coefficient population stds for both channels, the reference scale
/// for noise injection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopulationStd {
    pub shape: Vec<f64>,
    pub texture: Vec<f64>,
}

/// Analytic population stds implied by the model at a sampling sigma.
pub fn population_std(pair: &ModelPair, residual_sigma: f64) -> PopulationStd {
    PopulationStd {
        shape: (0..pair.shape.n_pcs())
            .map(|k| pair.shape.coeff_std(residual_sigma, k))
            .collect(),
        texture: (0..pair.texture.n_pcs())
            .map(|k| pair.texture.coeff_std(residual_sigma, k))
            .collect(),
    }
}

/// Draw a random identity in a factor cell: residual coefficient k is
/// N(0, (residual_sigma * sv_k / sqrt(n))^2), seeded, per channel.
pub fn sample_identity(
    pair: &ModelPair,
    factor_levels: &[usize],
    residual_sigma: f64,
    seed: u64,
    id_label: usize,
) -> Result<Identity> {
    if !(residual_sigma >= 0.0) {
        return Err(Error::InvalidScale(format!(
            "residual_sigma must be >= 0, got {residual_sigma}"
        )));
    }
    pair.shape.design_coding.validate_levels(factor_levels)?;
    let mut rng = seeding::rng(seeding::split(seed, "identity.sample"));
    let mut draw = |model: &GlmIdentityModel| -> Vec<f64> {
        (0..model.n_pcs())
            .map(|k| model.coeff_std(residual_sigma, k) * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let shape_coeffs = draw(&pair.shape);
    let texture_coeffs = draw(&pair.texture);
    Ok(Identity {
        factor_levels: factor_levels.to_vec(),
        shape_coeffs,
        texture_coeffs,
        id_label,
    })
}

/// Add seeded diagonal Gaussian noise to the selected channel's residual
/// coefficients; the other channel is returned bit-identical.
pub fn inject_noise(
    identity: &Identity,
    noise: &NoiseSpec,
    std: &PopulationStd,
) -> Result<Identity> {
    noise.validate()?;
    let mut rng = seeding::rng(seeding::split(noise.seed, "identity.noise"));
    let mut out = identity.clone();
    let mut perturb = |coeffs: &mut Vec<f64>, stds: &[f64], name: &str| -> Result<()> {
        if coeffs.len() != stds.len() {
            return Err(Error::InvalidScale(format!(
                "{name}: {} stds for {} coefficients",
                stds.len(),
                coeffs.len()
            )));
        }
        for (c, &s) in coeffs.iter_mut().zip(stds) {
            if !(s > 0.0) {
                return Err(Error::InvalidScale(format!(
                    "{name}: population std must be strictly positive, got {s}"
                )));
            }
            *c += noise.proportion * s * rng.sample::<f64, _>(StandardNormal);
        }
        Ok(())
    };
    if noise.channel.touches(Channel::Shape) {
        perturb(&mut out.shape_coeffs, &std.shape, "shape")?;
    }
    if noise.channel.touches(Channel::Texture) {
        perturb(&mut out.texture_coeffs, &std.texture, "texture")?;
    }
    Ok(out)
}

/// Generate a balanced planted-coefficient database: every factor cell
/// `replicates` times, value = design row x b0 + iid Gaussian noise.
pub fn synthesize_database(
    spec: &FactorSpec,
    b0: &Array2<f64>,
    replicates: usize,
    noise_std: f64,
    seed: u64,
) -> Result<(Vec<Vec<usize>>, Array2<f64>)> {
    if replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be >= 1".into()));
    }
    if b0.nrows() != spec.n_columns() {
        return Err(Error::InvalidConfig(format!(
            "b0 has {} rows, design coding has {} columns",
            b0.nrows(),
            spec.n_columns()
        )));
    }
    let mut rows = Vec::new();
    for cell in spec.all_cells() {
        for _ in 0..replicates {
            rows.push(cell.clone());
        }
    }
    let design = build_design_matrix(&rows, spec)?;
    let mut database = design.dot(b0);
    if noise_std > 0.0 {
        let mut rng = seeding::rng(seeding::split(seed, "database.noise"));
        for v in database.iter_mut() {
            *v += noise_std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok((rows, database))
}

/// Fit one channel's identity model from a coefficient database.
pub fn fit_identity_model(
    spec: &FactorSpec,
    factor_levels_per_row: &[Vec<usize>],
    database: &Array2<f64>,
    n_pcs: usize,
    channel: Channel,
) -> Result<GlmIdentityModel> {
    let design = build_design_matrix(factor_levels_per_row, spec)?;
    let (coefficients, residuals) = fit_glm(database, &design)?;
    let (residual_components, residual_singular_values, _) = residual_pca(&residuals, n_pcs)?;
    Ok(GlmIdentityModel {
        design_coding: spec.clone(),
        coefficients,
        residual_components,
        residual_singular_values,
        channel,
        n_database_rows: database.nrows(),
    })
}
