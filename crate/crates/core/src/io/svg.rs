//! Deterministic SVG heatmaps for feature maps and dissimilarity matrices.
//!
//! Output is plain SVG 1.1 text built with fixed number formatting, so the
//! same input always yields byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::imat::atomic_write;
use crate::analysis::{FeatureMap, MapKind};
use crate::error::{Error, Result};
use crate::linalg::Rdm;

/// Value-to-color convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Colormap {
    /// White through blue; zero anchors the light end. For nonnegative maps.
    Sequential,
    /// Blue-white-red, symmetric around zero. For signed maps (synergy shows
    /// as blue; values are only clamped here, never in the stored map).
    Diverging,
}

const CELL: usize = 12;
const MARGIN: usize = 8;
const BAR_STEPS: usize = 40;
const LINE: usize = 14;

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Piecewise-linear color over fixed stops, t clamped to [0, 1].
fn color(map: Colormap, t: f64) -> String {
    let stops: [(f64, f64, f64); 3] = match map {
        Colormap::Sequential => [(255.0, 255.0, 255.0), (120.0, 160.0, 204.0), (13.0, 38.0, 89.0)],
        Colormap::Diverging => [(33.0, 68.0, 160.0), (255.0, 255.0, 255.0), (178.0, 24.0, 43.0)],
    };
    let t = t.clamp(0.0, 1.0);
    let (lo, hi, f) = if t <= 0.5 {
        (stops[0], stops[1], t * 2.0)
    } else {
        (stops[1], stops[2], (t - 0.5) * 2.0)
    };
    let r = lerp(lo.0, hi.0, f).round() as u8;
    let g = lerp(lo.1, hi.1, f).round() as u8;
    let b = lerp(lo.2, hi.2, f).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Map a value to the colormap coordinate given the rendered value range.
fn scale(map: Colormap, v: f64, lo: f64, hi: f64) -> f64 {
    match map {
        Colormap::Sequential => {
            let lo = lo.min(0.0);
            if hi > lo {
                (v - lo) / (hi - lo)
            } else {
                0.0
            }
        }
        Colormap::Diverging => {
            let a = lo.abs().max(hi.abs());
            if a > 0.0 {
                0.5 + v / (2.0 * a)
            } else {
                0.5
            }
        }
    }
}

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

struct GridSpec<'a> {
    grid_h: usize,
    grid_w: usize,
    /// (row, col, value) per cell, one rect each.
    cells: &'a [(usize, usize, f64)],
    title: String,
    min: f64,
    max: f64,
    threshold: Option<f64>,
}

fn render(spec: &GridSpec, colormap: Colormap) -> String {
    let gw = spec.grid_w * CELL;
    let gh = spec.grid_h * CELL;
    let legend_lines = 2 + spec.threshold.is_some() as usize;
    let width = gw + 2 * MARGIN;
    let height = MARGIN + LINE + gh + MARGIN + CELL + legend_lines * LINE + MARGIN;
    let (lo, hi) = (spec.min, spec.max);

    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    );
    let _ = write!(
        s,
        "<rect width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>\n"
    );
    let _ = write!(
        s,
        "<text x=\"{MARGIN}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\">{}</text>\n",
        MARGIN + 10,
        spec.title
    );
    let top = MARGIN + LINE;
    for &(r, c, v) in spec.cells {
        let _ = write!(
            s,
            "<rect class=\"cell\" x=\"{}\" y=\"{}\" width=\"{CELL}\" height=\"{CELL}\" \
             fill=\"{}\"/>\n",
            MARGIN + c * CELL,
            top + r * CELL,
            color(colormap, scale(colormap, v, lo, hi))
        );
    }
    let bar_y = top + gh + MARGIN;
    let bar_w = gw / BAR_STEPS;
    for i in 0..BAR_STEPS {
        let t = (i as f64 + 0.5) / BAR_STEPS as f64;
        let _ = write!(
            s,
            "<rect x=\"{}\" y=\"{bar_y}\" width=\"{bar_w}\" height=\"{CELL}\" fill=\"{}\"/>\n",
            MARGIN + i * bar_w,
            color(colormap, t)
        );
    }
    let mut ty = bar_y + CELL + LINE - 3;
    let mut legend_line = |s: &mut String, text: String| {
        let _ = write!(
            s,
            "<text x=\"{MARGIN}\" y=\"{ty}\" font-family=\"monospace\" font-size=\"10\">{text}</text>\n"
        );
        ty += LINE;
    };
    legend_line(&mut s, format!("min {}", fmt6(spec.min)));
    legend_line(&mut s, format!("max {}", fmt6(spec.max)));
    if let Some(t) = spec.threshold {
        legend_line(&mut s, format!("threshold {}", fmt6(t)));
    }
    s.push_str("</svg>\n");
    s
}

fn map_title(map: &FeatureMap) -> String {
    let mut t = match map.kind {
        MapKind::Diagnostic => "diagnostic map".to_string(),
        MapKind::LayerPc => "layer PC map".to_string(),
        MapKind::Redundancy => "redundancy map".to_string(),
    };
    if let Some(pc) = map.pc_index {
        let _ = write!(t, " pc {pc}");
    }
    if let Some(vp) = map.viewpoint_deg {
        let _ = write!(t, " viewpoint {vp}");
    }
    t
}

/// Render a feature map as SVG text. Maps carrying a threshold render their
/// thresholded values; the legend always reports the raw range.
pub fn svg_heatmap_string(map: &FeatureMap, colormap: Colormap) -> Result<String> {
    let geo = &map.geometry;
    if geo.coords.len() != map.values.len() {
        return Err(Error::InvalidGeometry(format!(
            "{} values but geometry places {} features",
            map.values.len(),
            geo.coords.len()
        )));
    }
    for (f, &(r, c)) in geo.coords.iter().enumerate() {
        if r >= geo.grid_h || c >= geo.grid_w {
            return Err(Error::InvalidGeometry(format!(
                "feature {f} at ({r}, {c}) outside {}x{} grid",
                geo.grid_h, geo.grid_w
            )));
        }
    }
    let rendered = map.thresholded_values();
    let cells: Vec<(usize, usize, f64)> = geo
        .coords
        .iter()
        .zip(&rendered)
        .map(|(&(r, c), &v)| (r, c, v))
        .collect();
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &map.values {
        min = min.min(v);
        max = max.max(v);
    }
    if map.values.is_empty() {
        min = 0.0;
        max = 0.0;
    }
    Ok(render(
        &GridSpec {
            grid_h: geo.grid_h,
            grid_w: geo.grid_w,
            cells: &cells,
            title: map_title(map),
            min,
            max,
            threshold: map.threshold,
        },
        colormap,
    ))
}

/// Write a feature-map heatmap atomically at `path`.
pub fn write_svg_heatmap(map: &FeatureMap, path: &Path, colormap: Colormap) -> Result<()> {
    atomic_write(path, svg_heatmap_string(map, colormap)?.as_bytes())
}

/// Render a square matrix (an RDM or any other) as an SVG heatmap.
pub fn svg_matrix_string(matrix: &Array2<f64>, title: &str, colormap: Colormap) -> String {
    let (h, w) = matrix.dim();
    let cells: Vec<(usize, usize, f64)> = matrix
        .indexed_iter()
        .map(|((r, c), &v)| (r, c, v))
        .collect();
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in matrix.iter() {
        min = min.min(v);
        max = max.max(v);
    }
    if matrix.is_empty() {
        min = 0.0;
        max = 0.0;
    }
    render(
        &GridSpec {
            grid_h: h,
            grid_w: w,
            cells: &cells,
            title: title.to_string(),
            min,
            max,
            threshold: None,
        },
        colormap,
    )
}

/// Write an RDM heatmap with its block ratio in the title.
pub fn write_svg_rdm(rdm: &Rdm, identity: usize, path: &Path) -> Result<()> {
    let title = format!(
        "rdm identity {identity} within/between {}",
        fmt6(rdm.within_block_mean / rdm.between_block_mean)
    );
    atomic_write(
        path,
        svg_matrix_string(&rdm.matrix, &title, Colormap::Sequential).as_bytes(),
    )
}
