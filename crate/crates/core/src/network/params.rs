//! Parameter tensors, seeded initialization, and in-place updates.
//!
//! Weight layout is fixed and documented because parameters round-trip
//! through the on-disk matrix format: convolution weights are
//! (out_channels, in_channels, k, k), dense weights are (out, in), biases
//! are flat. Initialization draws weights layer by layer from independent
//! child seeds, so inserting a layer does not shift the draws of the others.

use ndarray::{Array1, Array2, Array4};
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::seeding;

use super::spec::{LayerSpec, NetSpec, Shape};

/// Parameters of one layer; variants mirror [`LayerSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams {
    Conv {
        weight: Array4<f64>,
        bias: Array1<f64>,
    },
    Residual {
        conv1_weight: Array4<f64>,
        conv1_bias: Array1<f64>,
        conv2_weight: Array4<f64>,
        conv2_bias: Array1<f64>,
        /// Strided 1x1 projection, present only when the block changes shape.
        projection: Option<(Array4<f64>, Array1<f64>)>,
    },
    Dense {
        weight: Array2<f64>,
        bias: Array1<f64>,
    },
    /// Rectifier and pool layers carry no parameters.
    None,
}

/// Full parameter set of a network plus the seed it was initialized from.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub layers: Vec<LayerParams>,
    pub seed: u64,
}

/// Zero-mean normal draws scaled by sqrt(2 / fan_in); biases start at zero.
fn he_conv(
    rng: &mut impl rand::Rng,
    out_c: usize,
    in_c: usize,
    k: usize,
) -> (Array4<f64>, Array1<f64>) {
    let fan_in = (in_c * k * k) as f64;
    let dist = Normal::new(0.0, (2.0 / fan_in).sqrt()).unwrap();
    let weight = Array4::from_shape_fn((out_c, in_c, k, k), |_| dist.sample(rng));
    (weight, Array1::zeros(out_c))
}

fn he_dense(rng: &mut impl rand::Rng, out: usize, inp: usize) -> (Array2<f64>, Array1<f64>) {
    let dist = Normal::new(0.0, (2.0 / inp as f64).sqrt()).unwrap();
    let weight = Array2::from_shape_fn((out, inp), |_| dist.sample(rng));
    (weight, Array1::zeros(out))
}

fn input_channels(shape: Shape) -> usize {
    match shape {
        Shape::Image { channels, .. } => channels,
        Shape::Vector { len } => len,
    }
}

impl Params {
    /// Seeded fan-in initialization for every layer of `spec`.
    ///
    /// Layer `i` draws from the child seed ("net.init", i), in tensor order:
    /// convolution weights first, then (for residual blocks) the second
    /// convolution and the projection.
    pub fn init(spec: &NetSpec, seed: u64) -> Result<Params> {
        let shapes = spec.validate()?;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (i, layer) in spec.layers.iter().enumerate() {
            let in_shape = if i == 0 {
                Shape::Image {
                    channels: 1,
                    height: spec.input_shape.0,
                    width: spec.input_shape.1,
                }
            } else {
                shapes[i - 1]
            };
            let in_n = input_channels(in_shape);
            let mut rng = seeding::rng(seeding::split_indexed(seed, "net.init", i as u64));
            layers.push(match *layer {
                LayerSpec::Conv3x3 { channels, .. } => {
                    let (weight, bias) = he_conv(&mut rng, channels, in_n, 3);
                    LayerParams::Conv { weight, bias }
                }
                LayerSpec::ResidualBlock { channels, stride } => {
                    let (conv1_weight, conv1_bias) = he_conv(&mut rng, channels, in_n, 3);
                    let (conv2_weight, conv2_bias) = he_conv(&mut rng, channels, channels, 3);
                    let projection = if stride != 1 || channels != in_n {
                        Some(he_conv(&mut rng, channels, in_n, 1))
                    } else {
                        None
                    };
                    LayerParams::Residual {
                        conv1_weight,
                        conv1_bias,
                        conv2_weight,
                        conv2_bias,
                        projection,
                    }
                }
                LayerSpec::Dense { units } => {
                    let (weight, bias) = he_dense(&mut rng, units, in_n);
                    LayerParams::Dense { weight, bias }
                }
                // The score layer starts two orders smaller than fan-in
                // scaling so training descends from near the uniform
                // predictor instead of fighting random class preferences,
                // while gradients still reach every layer below.
                LayerSpec::Logits => {
                    let (mut weight, bias) = he_dense(&mut rng, spec.n_classes, in_n);
                    weight *= 0.01;
                    LayerParams::Dense { weight, bias }
                }
                LayerSpec::Relu | LayerSpec::GlobalAvgPool => LayerParams::None,
            });
        }
        Ok(Params { layers, seed })
    }

    /// Same structure with every tensor zeroed; gradient and velocity holder.
    pub fn zeros_like(&self) -> Params {
        let mut out = self.clone();
        out.for_each_slice_mut(&mut |s| s.fill(0.0));
        out
    }

    /// Every tensor as a flat slice, in a fixed order.
    pub(crate) fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                LayerParams::Conv { weight, bias } => {
                    out.push(weight.as_slice().unwrap());
                    out.push(bias.as_slice().unwrap());
                }
                LayerParams::Residual {
                    conv1_weight,
                    conv1_bias,
                    conv2_weight,
                    conv2_bias,
                    projection,
                } => {
                    out.push(conv1_weight.as_slice().unwrap());
                    out.push(conv1_bias.as_slice().unwrap());
                    out.push(conv2_weight.as_slice().unwrap());
                    out.push(conv2_bias.as_slice().unwrap());
                    if let Some((w, b)) = projection {
                        out.push(w.as_slice().unwrap());
                        out.push(b.as_slice().unwrap());
                    }
                }
                LayerParams::Dense { weight, bias } => {
                    out.push(weight.as_slice().unwrap());
                    out.push(bias.as_slice().unwrap());
                }
                LayerParams::None => {}
            }
        }
        out
    }

    /// Mutable counterpart of [`Params::slices`], same order.
    pub(crate) fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                LayerParams::Conv { weight, bias } => {
                    out.push(weight.as_slice_mut().unwrap());
                    out.push(bias.as_slice_mut().unwrap());
                }
                LayerParams::Residual {
                    conv1_weight,
                    conv1_bias,
                    conv2_weight,
                    conv2_bias,
                    projection,
                } => {
                    out.push(conv1_weight.as_slice_mut().unwrap());
                    out.push(conv1_bias.as_slice_mut().unwrap());
                    out.push(conv2_weight.as_slice_mut().unwrap());
                    out.push(conv2_bias.as_slice_mut().unwrap());
                    if let Some((w, b)) = projection {
                        out.push(w.as_slice_mut().unwrap());
                        out.push(b.as_slice_mut().unwrap());
                    }
                }
                LayerParams::Dense { weight, bias } => {
                    out.push(weight.as_slice_mut().unwrap());
                    out.push(bias.as_slice_mut().unwrap());
                }
                LayerParams::None => {}
            }
        }
        out
    }

    /// Visit every tensor as a flat slice, in a fixed order.
    pub(crate) fn for_each_slice(&self, f: &mut impl FnMut(&[f64])) {
        for s in self.slices() {
            f(s);
        }
    }

    /// Mutable counterpart of [`Params::for_each_slice`], same order.
    pub(crate) fn for_each_slice_mut(&mut self, f: &mut impl FnMut(&mut [f64])) {
        for s in self.slices_mut() {
            f(s);
        }
    }

    /// Total scalar parameter count.
    pub fn n_parameters(&self) -> usize {
        let mut n = 0;
        self.for_each_slice(&mut |s| n += s.len());
        n
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_slice(&mut |s| ok &= s.iter().all(|x| x.is_finite()));
        ok
    }

    /// Accumulate `other` into `self`, tensor by tensor.
    pub(crate) fn add_assign(&mut self, other: &Params) {
        let others = other.slices();
        let mine = self.slices_mut();
        assert_eq!(mine.len(), others.len(), "parameter structure mismatch");
        for (s, o) in mine.into_iter().zip(others) {
            assert_eq!(s.len(), o.len(), "parameter structure mismatch");
            for (a, b) in s.iter_mut().zip(o) {
                *a += *b;
            }
        }
    }

    pub(crate) fn scale(&mut self, c: f64) {
        self.for_each_slice_mut(&mut |s| {
            for x in s {
                *x *= c;
            }
        });
    }

    /// Momentum step on every tensor: v <- momentum v - lr g, then w <- w + v.
    pub(crate) fn sgd_update(
        &mut self,
        velocity: &mut Params,
        grads: &Params,
        lr: f64,
        momentum: f64,
    ) {
        let gs = grads.slices();
        let vs = velocity.slices_mut();
        let ws = self.slices_mut();
        assert_eq!(ws.len(), gs.len(), "parameter structure mismatch");
        assert_eq!(ws.len(), vs.len(), "parameter structure mismatch");
        for ((w, v), g) in ws.into_iter().zip(vs).zip(gs) {
            assert_eq!(w.len(), g.len(), "parameter structure mismatch");
            for i in 0..w.len() {
                v[i] = momentum * v[i] - lr * g[i];
                w[i] += v[i];
            }
        }
    }

    /// Named 2-D views of every tensor for serialization. Convolution
    /// weights flatten to (out_channels, in_channels * k * k); biases are
    /// single-row matrices. Names follow "layer{i}.{tensor}".
    pub fn to_matrices(&self) -> Vec<(String, Array2<f64>)> {
        fn conv_mat(w: &Array4<f64>) -> Array2<f64> {
            let (o, i, kh, kw) = w.dim();
            w.to_shape((o, i * kh * kw)).unwrap().to_owned()
        }
        fn bias_mat(b: &Array1<f64>) -> Array2<f64> {
            b.to_shape((1, b.len())).unwrap().to_owned()
        }
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                LayerParams::Conv { weight, bias } => {
                    out.push((format!("layer{i}.weight"), conv_mat(weight)));
                    out.push((format!("layer{i}.bias"), bias_mat(bias)));
                }
                LayerParams::Residual {
                    conv1_weight,
                    conv1_bias,
                    conv2_weight,
                    conv2_bias,
                    projection,
                } => {
                    out.push((format!("layer{i}.conv1.weight"), conv_mat(conv1_weight)));
                    out.push((format!("layer{i}.conv1.bias"), bias_mat(conv1_bias)));
                    out.push((format!("layer{i}.conv2.weight"), conv_mat(conv2_weight)));
                    out.push((format!("layer{i}.conv2.bias"), bias_mat(conv2_bias)));
                    if let Some((w, b)) = projection {
                        out.push((format!("layer{i}.projection.weight"), conv_mat(w)));
                        out.push((format!("layer{i}.projection.bias"), bias_mat(b)));
                    }
                }
                LayerParams::Dense { weight, bias } => {
                    out.push((format!("layer{i}.weight"), weight.clone()));
                    out.push((format!("layer{i}.bias"), bias_mat(bias)));
                }
                LayerParams::None => {}
            }
        }
        out
    }

    /// Rebuild parameters from named matrices produced by
    /// [`Params::to_matrices`]. The spec fixes every expected name and
    /// shape; any missing, extra, or misshapen tensor is an error.
    pub fn from_matrices(
        spec: &NetSpec,
        seed: u64,
        matrices: &[(String, Array2<f64>)],
    ) -> Result<Params> {
        let mut params = Params::init(spec, seed)?;
        let expected = params.to_matrices();
        if matrices.len() != expected.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} parameter tensors, got {}",
                expected.len(),
                matrices.len()
            )));
        }
        let mut flat: Vec<f64> = Vec::new();
        for ((name, mat), (want_name, want_mat)) in matrices.iter().zip(&expected) {
            if name != want_name {
                return Err(Error::InvalidInput(format!(
                    "unexpected tensor '{name}' (expected '{want_name}')"
                )));
            }
            if mat.dim() != want_mat.dim() {
                return Err(Error::InvalidInput(format!(
                    "tensor '{name}' has shape {:?}, expected {:?}",
                    mat.dim(),
                    want_mat.dim()
                )));
            }
            flat.extend(mat.iter());
        }
        let mut k = 0;
        params.for_each_slice_mut(&mut |s| {
            s.copy_from_slice(&flat[k..k + s.len()]);
            k += s.len();
        });
        if !params.all_finite() {
            return Err(Error::InvalidInput("non-finite parameter value".into()));
        }
        Ok(params)
    }
}
