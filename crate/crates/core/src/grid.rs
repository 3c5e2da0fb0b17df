//! Bilinear image sampling and the scale/translate warp shared by the
//! renderer and training-time augmentation.

use ndarray::Array2;

/// Bilinear sample of `img` at fractional (x, y) = (column, row).
/// Texels outside the image contribute `background`, so warps that read past
/// the border blend toward a uniform field instead of clamping.
pub fn bilinear_sample(img: &Array2<f64>, x: f64, y: f64, background: f64) -> f64 {
    let (h, w) = img.dim();
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let fetch = |yi: f64, xi: f64| -> f64 {
        if xi < 0.0 || yi < 0.0 || xi > (w - 1) as f64 || yi > (h - 1) as f64 {
            background
        } else {
            img[[yi as usize, xi as usize]]
        }
    };
    let v00 = fetch(y0, x0);
    let v01 = fetch(y0, x0 + 1.0);
    let v10 = fetch(y0 + 1.0, x0);
    let v11 = fetch(y0 + 1.0, x0 + 1.0);
    let top = v00 * (1.0 - fx) + v01 * fx;
    let bottom = v10 * (1.0 - fx) + v11 * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Resample `img` under a center-anchored scale plus a translation given as
/// fractions of the image size. scale > 1 enlarges the content.
pub fn scale_translate(
    img: &Array2<f64>,
    scale: f64,
    tx_frac: f64,
    ty_frac: f64,
    background: f64,
) -> Array2<f64> {
    let (h, w) = img.dim();
    let cx = (w - 1) as f64 / 2.0;
    let cy = (h - 1) as f64 / 2.0;
    let tx = tx_frac * w as f64;
    let ty = ty_frac * h as f64;
    Array2::from_shape_fn((h, w), |(r, c)| {
        let sx = cx + (c as f64 - cx - tx) / scale;
        let sy = cy + (r as f64 - cy - ty) / scale;
        bilinear_sample(img, sx, sy, background)
    })
}
