//! Procedural stimulus renderer.
//!
//! A stimulus is a 32x32 grid built from the identity's coefficients:
//! texture coefficients set the intensities of a 4x4 block layout, shape
//! coefficients displace a 6x6 control mesh that warps the blocks, and the
//! extrinsic factors (viewpoint squeeze-shear, illumination gradient, scale,
//! translation) act on top. Everything composes into one inverse coordinate
//! map per output pixel followed by a single bilinear sample, so rendering
//! is a pure function of the spec.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::model::{Identity, ModelPair, NoiseSpec};
use crate::error::{Error, Result};
use crate::grid::bilinear_sample;

/// Output grid side length.
pub const GRID: usize = 32;
/// Control mesh side (GRID is warped by MESH x MESH displaced points).
pub const MESH: usize = 6;
/// Texture block layout side (TEX_GRID^2 regions of equal size).
pub const TEX_GRID: usize = 4;
/// Shape channel dimensionality: (dx, dy) per control point.
pub const SHAPE_DIMS: usize = MESH * MESH * 2;
/// Texture channel dimensionality: one intensity per region.
pub const TEXTURE_DIMS: usize = TEX_GRID * TEX_GRID;

/// The five-viewpoint grid shared by rotation and illumination, degrees.
pub const EXTRINSIC_GRID: [f64; 5] = [-30.0, -15.0, 0.0, 15.0, 30.0];

const SHEAR: f64 = 0.3;
const ILLUM_GAIN: f64 = 0.5;
const BACKGROUND: f64 = 0.5;
const BASE_INTENSITY: f64 = 0.5;

/// Full description of one stimulus to render.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StimulusSpec {
    pub identity: Identity,
    /// Depth-rotation angle, degrees; must lie on EXTRINSIC_GRID.
    pub viewpoint_deg: f64,
    /// Illumination direction, degrees; must lie on EXTRINSIC_GRID.
    pub illumination_deg: f64,
    /// Content magnification, in [1, 2].
    pub scale: f64,
    /// (dx, dy) as fractions of the grid size, each in [0, 0.3].
    pub translation: (f64, f64),
    /// Provenance: the noise injected into `identity`, if any.
    pub noise: Option<NoiseSpec>,
}

impl StimulusSpec {
    /// Neutral extrinsics: frontal view, frontal light, unit scale, centered.
    pub fn neutral(identity: Identity, viewpoint_deg: f64) -> StimulusSpec {
        StimulusSpec {
            identity,
            viewpoint_deg,
            illumination_deg: 0.0,
            scale: 1.0,
            translation: (0.0, 0.0),
            noise: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let on_grid = |v: f64| EXTRINSIC_GRID.iter().any(|&g| (v - g).abs() < 1e-9);
        if !on_grid(self.viewpoint_deg) {
            return Err(Error::InvalidSpec(format!(
                "viewpoint {} deg is not on the {:?} grid",
                self.viewpoint_deg, EXTRINSIC_GRID
            )));
        }
        if !on_grid(self.illumination_deg) {
            return Err(Error::InvalidSpec(format!(
                "illumination {} deg is not on the {:?} grid",
                self.illumination_deg, EXTRINSIC_GRID
            )));
        }
        if !(1.0..=2.0).contains(&self.scale) {
            return Err(Error::InvalidSpec(format!(
                "scale {} outside [1, 2]",
                self.scale
            )));
        }
        let (tx, ty) = self.translation;
        if !(0.0..=0.3).contains(&tx) || !(0.0..=0.3).contains(&ty) {
            return Err(Error::InvalidSpec(format!(
                "translation ({tx}, {ty}) outside [0, 0.3]"
            )));
        }
        Ok(())
    }
}

/// Where each stimulus feature sits on the map grid, for drawing feature maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGeometry {
    pub grid_h: usize,
    pub grid_w: usize,
    /// (row, col) per feature.
    pub coords: Vec<(usize, usize)>,
}

impl FeatureGeometry {
    /// One feature per pixel, row-major.
    pub fn pixel_grid(h: usize, w: usize) -> FeatureGeometry {
        let coords = (0..h * w).map(|f| (f / w, f % w)).collect();
        FeatureGeometry {
            grid_h: h,
            grid_w: w,
            coords,
        }
    }

    pub fn n_features(&self) -> usize {
        self.coords.len()
    }
}

/// A rendered stimulus: the pixel grid, per-feature coordinates, and the
/// spec that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RenderedStimulus {
    /// GRID x GRID, values in [0, 1].
    pub pixels: Array2<f64>,
    pub feature_coords: Vec<(usize, usize)>,
    pub spec: StimulusSpec,
}

fn check_channel_dims(pair: &ModelPair) -> Result<()> {
    if pair.shape.n_coeff_dims() != SHAPE_DIMS {
        return Err(Error::InvalidConfig(format!(
            "shape model has {} coefficient dims; the renderer needs {SHAPE_DIMS}",
            pair.shape.n_coeff_dims()
        )));
    }
    if pair.texture.n_coeff_dims() != TEXTURE_DIMS {
        return Err(Error::InvalidConfig(format!(
            "texture model has {} coefficient dims; the renderer needs {TEXTURE_DIMS}",
            pair.texture.n_coeff_dims()
        )));
    }
    Ok(())
}

/// Piecewise-constant texture template: each TEX_GRID block takes
/// BASE_INTENSITY plus its coefficient.
fn build_template(texture: &[f64]) -> Array2<f64> {
    let block = GRID / TEX_GRID;
    Array2::from_shape_fn((GRID, GRID), |(r, c)| {
        let region = (r / block) * TEX_GRID + (c / block);
        BASE_INTENSITY + texture[region]
    })
}

/// Bilinear interpolation of the control-point displacement field at (x, y).
fn mesh_displacement(shape: &[f64], x: f64, y: f64) -> (f64, f64) {
    let spacing = (GRID - 1) as f64 / (MESH - 1) as f64;
    let u = (x / spacing).clamp(0.0, (MESH - 1) as f64);
    let v = (y / spacing).clamp(0.0, (MESH - 1) as f64);
    let j0 = (u.floor() as usize).min(MESH - 2);
    let i0 = (v.floor() as usize).min(MESH - 2);
    let fu = u - j0 as f64;
    let fv = v - i0 as f64;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for (di, wv) in [(0, 1.0 - fv), (1, fv)] {
        for (dj, wu) in [(0, 1.0 - fu), (1, fu)] {
            let idx = 2 * ((i0 + di) * MESH + (j0 + dj));
            let w = wv * wu;
            dx += w * shape[idx];
            dy += w * shape[idx + 1];
        }
    }
    (dx, dy)
}

/// Render one stimulus from its spec and the fitted model pair.
pub fn render_stimulus(spec: &StimulusSpec, pair: &ModelPair) -> Result<RenderedStimulus> {
    spec.validate()?;
    check_channel_dims(pair)?;
    let shape = pair
        .shape
        .identity_coefficients(&spec.identity.factor_levels, &spec.identity.shape_coeffs)?;
    let texture = pair
        .texture
        .identity_coefficients(&spec.identity.factor_levels, &spec.identity.texture_coeffs)?;
    let template = build_template(texture.as_slice().expect("contiguous"));
    let shape = shape.as_slice().expect("contiguous");

    let c = (GRID - 1) as f64 / 2.0;
    let theta = spec.viewpoint_deg.to_radians();
    let phi = spec.illumination_deg.to_radians();
    let (sin_t, cos_t) = (theta.sin(), theta.cos());
    let illum = ILLUM_GAIN * phi.sin();
    let (tx, ty) = (
        spec.translation.0 * GRID as f64,
        spec.translation.1 * GRID as f64,
    );

    let pixels = Array2::from_shape_fn((GRID, GRID), |(r, col)| {
        // undo translation and scale
        let x1 = c + (col as f64 - c - tx) / spec.scale;
        let y1 = c + (r as f64 - c - ty) / spec.scale;
        // illumination rides on face-centered coordinates
        let gain = 1.0 + illum * (x1 - c) / c;
        // undo the viewpoint squeeze-shear
        let x2 = c + ((x1 - c) - SHEAR * sin_t * (y1 - c)) / cos_t;
        let y2 = y1;
        // undo the mesh warp
        let (dx, dy) = mesh_displacement(shape, x2, y2);
        let x3 = x2 - dx;
        let y3 = y2 - dy;
        (bilinear_sample(&template, x3, y3, BACKGROUND) * gain).clamp(0.0, 1.0)
    });

    Ok(RenderedStimulus {
        pixels,
        feature_coords: FeatureGeometry::pixel_grid(GRID, GRID).coords,
        spec: spec.clone(),
    })
}
