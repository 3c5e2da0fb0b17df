//! Per-layer forward and backward kernels.
//!
//! Everything runs in 64-bit floats on standard-layout arrays so gradients
//! can be held to finite-difference oracles at tight tolerance. Convolutions
//! use an explicit shift-and-accumulate loop over kernel taps; the padded
//! border is handled by clipping each tap's output range rather than by
//! materializing a padded copy.

use ndarray::{Array1, Array2, Array3, Array4, Axis};

use super::params::LayerParams;
use super::spec::{conv_out_len, LayerSpec};

/// Activation tensor flowing between layers.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Act {
    Image(Array3<f64>),
    Vector(Array1<f64>),
}

impl Act {
    pub(crate) fn flatten(&self) -> Array1<f64> {
        match self {
            Act::Image(a) => Array1::from_iter(a.iter().copied()),
            Act::Vector(v) => v.clone(),
        }
    }

    fn image(self) -> Array3<f64> {
        match self {
            Act::Image(a) => a,
            Act::Vector(_) => panic!("expected image activation"),
        }
    }

    fn vector(self) -> Array1<f64> {
        match self {
            Act::Vector(v) => v,
            Act::Image(_) => panic!("expected vector activation"),
        }
    }
}

/// Values saved during a tracked forward pass, consumed by backward.
pub(crate) enum Tape {
    Conv {
        input: Array3<f64>,
    },
    Residual {
        input: Array3<f64>,
        /// First convolution output, before the inner rectifier.
        pre1: Array3<f64>,
        /// Rectified `pre1`, the second convolution's input.
        hidden: Array3<f64>,
    },
    Relu {
        input: Act,
    },
    Pool {
        in_dim: (usize, usize, usize),
    },
    Dense {
        input: Array1<f64>,
    },
}

/// Output range of positions `o` with `0 <= o*stride + tap - pad < len`.
fn tap_range(len: usize, out_len: usize, stride: usize, tap: usize, pad: usize) -> (usize, usize) {
    let s = stride as isize;
    let shift = tap as isize - pad as isize;
    let lo = if shift >= 0 { 0 } else { (-shift + s - 1) / s };
    let hi = (len as isize - 1 - shift).div_euclid(s) + 1;
    (
        lo.max(0) as usize,
        hi.clamp(0, out_len as isize) as usize,
    )
}

/// Padded square convolution (kernel edge `k` from the weight shape, pad k/2).
pub(crate) fn conv_forward(
    input: &Array3<f64>,
    weight: &Array4<f64>,
    bias: &Array1<f64>,
    stride: usize,
) -> Array3<f64> {
    let (in_c, h, w) = input.dim();
    let (out_c, w_in_c, k, _) = weight.dim();
    assert_eq!(in_c, w_in_c, "channel mismatch");
    let pad = k / 2;
    let oh = conv_out_len(h, stride);
    let ow = conv_out_len(w, stride);
    let inp = input.as_slice().expect("standard layout");
    let wts = weight.as_slice().expect("standard layout");
    let mut out = vec![0.0; out_c * oh * ow];
    for oc in 0..out_c {
        let ob = oc * oh * ow;
        out[ob..ob + oh * ow].fill(bias[oc]);
        for ic in 0..in_c {
            let ib = ic * h * w;
            for ky in 0..k {
                let (oy_lo, oy_hi) = tap_range(h, oh, stride, ky, pad);
                for kx in 0..k {
                    let wv = wts[((oc * in_c + ic) * k + ky) * k + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let (ox_lo, ox_hi) = tap_range(w, ow, stride, kx, pad);
                    for oy in oy_lo..oy_hi {
                        let iy = oy * stride + ky - pad;
                        let orow = ob + oy * ow;
                        let irow = ib + iy * w;
                        for ox in ox_lo..ox_hi {
                            // ox_lo guarantees ox*stride + kx >= pad.
                            out[orow + ox] += wv * inp[irow + ox * stride + kx - pad];
                        }
                    }
                }
            }
        }
    }
    Array3::from_shape_vec((out_c, oh, ow), out).unwrap()
}

/// Gradients of a padded convolution: returns (d input, d weight, d bias).
pub(crate) fn conv_backward(
    input: &Array3<f64>,
    weight: &Array4<f64>,
    stride: usize,
    grad_out: &Array3<f64>,
) -> (Array3<f64>, Array4<f64>, Array1<f64>) {
    let (in_c, h, w) = input.dim();
    let (out_c, _, k, _) = weight.dim();
    let pad = k / 2;
    let (_, oh, ow) = grad_out.dim();
    let inp = input.as_slice().expect("standard layout");
    let wts = weight.as_slice().expect("standard layout");
    let gout = grad_out.as_slice().expect("standard layout");
    let mut gin = vec![0.0; in_c * h * w];
    let mut gw = vec![0.0; weight.len()];
    let mut gb = vec![0.0; out_c];
    for oc in 0..out_c {
        let ob = oc * oh * ow;
        gb[oc] = gout[ob..ob + oh * ow].iter().sum();
        for ic in 0..in_c {
            let ib = ic * h * w;
            for ky in 0..k {
                let (oy_lo, oy_hi) = tap_range(h, oh, stride, ky, pad);
                for kx in 0..k {
                    let widx = ((oc * in_c + ic) * k + ky) * k + kx;
                    let wv = wts[widx];
                    let (ox_lo, ox_hi) = tap_range(w, ow, stride, kx, pad);
                    let mut acc = 0.0;
                    for oy in oy_lo..oy_hi {
                        let iy = oy * stride + ky - pad;
                        let orow = ob + oy * ow;
                        let irow = ib + iy * w;
                        for ox in ox_lo..ox_hi {
                            let g = gout[orow + ox];
                            let ix = irow + ox * stride + kx - pad;
                            acc += g * inp[ix];
                            gin[ix] += wv * g;
                        }
                    }
                    gw[widx] = acc;
                }
            }
        }
    }
    (
        Array3::from_shape_vec((in_c, h, w), gin).unwrap(),
        Array4::from_shape_vec(weight.raw_dim(), gw).unwrap(),
        Array1::from_vec(gb),
    )
}

fn relu_image(a: &Array3<f64>) -> Array3<f64> {
    a.mapv(|x| x.max(0.0))
}

fn relu_mask_mul<D: ndarray::Dimension>(
    pre: &ndarray::Array<f64, D>,
    grad: &ndarray::Array<f64, D>,
) -> ndarray::Array<f64, D> {
    let mut out = grad.clone();
    out.zip_mut_with(pre, |g, &x| {
        if x <= 0.0 {
            *g = 0.0;
        }
    });
    out
}

/// Forward pass through one layer. With `track` set, returns the tape
/// needed to backpropagate through it.
pub(crate) fn layer_forward(
    layer: &LayerSpec,
    params: &LayerParams,
    input: Act,
    track: bool,
) -> (Act, Option<Tape>) {
    match (layer, params) {
        (LayerSpec::Conv3x3 { stride, .. }, LayerParams::Conv { weight, bias }) => {
            let x = input.image();
            let out = conv_forward(&x, weight, bias, *stride);
            let tape = track.then(|| Tape::Conv { input: x });
            (Act::Image(out), tape)
        }
        (
            LayerSpec::ResidualBlock { stride, .. },
            LayerParams::Residual {
                conv1_weight,
                conv1_bias,
                conv2_weight,
                conv2_bias,
                projection,
            },
        ) => {
            let x = input.image();
            let pre1 = conv_forward(&x, conv1_weight, conv1_bias, *stride);
            let hidden = relu_image(&pre1);
            let mut out = conv_forward(&hidden, conv2_weight, conv2_bias, 1);
            match projection {
                Some((pw, pb)) => out += &conv_forward(&x, pw, pb, *stride),
                None => out += &x,
            }
            let tape = track.then(|| Tape::Residual {
                input: x,
                pre1,
                hidden,
            });
            (Act::Image(out), tape)
        }
        (LayerSpec::Relu, LayerParams::None) => {
            let out = match &input {
                Act::Image(a) => Act::Image(relu_image(a)),
                Act::Vector(v) => Act::Vector(v.mapv(|x| x.max(0.0))),
            };
            let tape = track.then(|| Tape::Relu { input });
            (out, tape)
        }
        (LayerSpec::GlobalAvgPool, LayerParams::None) => {
            let x = input.image();
            let dim = x.dim();
            let n = (dim.1 * dim.2) as f64;
            let mut v = Array1::zeros(dim.0);
            for c in 0..dim.0 {
                v[c] = x.index_axis(Axis(0), c).sum() / n;
            }
            let tape = track.then(|| Tape::Pool { in_dim: dim });
            (Act::Vector(v), tape)
        }
        (LayerSpec::Dense { .. } | LayerSpec::Logits, LayerParams::Dense { weight, bias }) => {
            let x = input.vector();
            let out = weight.dot(&x) + bias;
            let tape = track.then(|| Tape::Dense { input: x });
            (Act::Vector(out), tape)
        }
        _ => panic!("layer spec and parameters disagree"),
    }
}

/// Backward pass through one layer: input gradient plus parameter gradients
/// (same variant shape as the layer's parameters).
pub(crate) fn layer_backward(
    layer: &LayerSpec,
    params: &LayerParams,
    tape: &Tape,
    grad_out: Act,
) -> (Act, LayerParams) {
    match (layer, params, tape) {
        (
            LayerSpec::Conv3x3 { stride, .. },
            LayerParams::Conv { weight, .. },
            Tape::Conv { input },
        ) => {
            let g = grad_out.image();
            let (gin, gw, gb) = conv_backward(input, weight, *stride, &g);
            (
                Act::Image(gin),
                LayerParams::Conv {
                    weight: gw,
                    bias: gb,
                },
            )
        }
        (
            LayerSpec::ResidualBlock { stride, .. },
            LayerParams::Residual {
                conv1_weight,
                conv2_weight,
                projection,
                ..
            },
            Tape::Residual {
                input,
                pre1,
                hidden,
            },
        ) => {
            let g = grad_out.image();
            let (g_hidden, gw2, gb2) = conv_backward(hidden, conv2_weight, 1, &g);
            let g_pre1 = relu_mask_mul(pre1, &g_hidden);
            let (mut gin, gw1, gb1) = conv_backward(input, conv1_weight, *stride, &g_pre1);
            let gproj = match projection {
                Some((pw, _)) => {
                    let (gin_p, gpw, gpb) = conv_backward(input, pw, *stride, &g);
                    gin += &gin_p;
                    Some((gpw, gpb))
                }
                None => {
                    gin += &g;
                    None
                }
            };
            (
                Act::Image(gin),
                LayerParams::Residual {
                    conv1_weight: gw1,
                    conv1_bias: gb1,
                    conv2_weight: gw2,
                    conv2_bias: gb2,
                    projection: gproj,
                },
            )
        }
        (LayerSpec::Relu, LayerParams::None, Tape::Relu { input }) => {
            let gin = match (input, grad_out) {
                (Act::Image(x), Act::Image(g)) => Act::Image(relu_mask_mul(x, &g)),
                (Act::Vector(x), Act::Vector(g)) => Act::Vector(relu_mask_mul(x, &g)),
                _ => panic!("activation kind mismatch"),
            };
            (gin, LayerParams::None)
        }
        (LayerSpec::GlobalAvgPool, LayerParams::None, Tape::Pool { in_dim }) => {
            let g = grad_out.vector();
            let (c, h, w) = *in_dim;
            let scale = 1.0 / (h * w) as f64;
            let gin = Array3::from_shape_fn((c, h, w), |(ic, _, _)| g[ic] * scale);
            (Act::Image(gin), LayerParams::None)
        }
        (
            LayerSpec::Dense { .. } | LayerSpec::Logits,
            LayerParams::Dense { weight, .. },
            Tape::Dense { input },
        ) => {
            let g = grad_out.vector();
            let gin = weight.t().dot(&g);
            let gw = Array2::from_shape_fn((g.len(), input.len()), |(i, j)| g[i] * input[j]);
            (
                Act::Vector(gin),
                LayerParams::Dense {
                    weight: gw,
                    bias: g,
                },
            )
        }
        _ => panic!("layer spec, parameters, and tape disagree"),
    }
}
