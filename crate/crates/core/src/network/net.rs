//! Whole-network forward pass, loss, and exact batch gradients.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::exec;

use super::layers::{layer_backward, layer_forward, Act, Tape};
use super::params::{LayerParams, Params};
use super::spec::NetSpec;

/// Result of a forward pass: raw class scores and, when requested, the
/// flattened output of every capture point in spec order.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub logits: Array1<f64>,
    pub captures: Vec<(String, Array1<f64>)>,
}

fn check_input(spec: &NetSpec, params: &Params, pixels: &Array2<f64>) -> Result<()> {
    if pixels.dim() != spec.input_shape {
        return Err(Error::InvalidInput(format!(
            "input is {:?}, network expects {:?}",
            pixels.dim(),
            spec.input_shape
        )));
    }
    if params.layers.len() != spec.layers.len() {
        return Err(Error::InvalidInput(format!(
            "parameters cover {} layers, network has {}",
            params.layers.len(),
            spec.layers.len()
        )));
    }
    Ok(())
}

/// Mid-gray of the unit pixel range, subtracted before the first layer so
/// activations are zero-mean at initialization. Background-only input then
/// produces exactly zero scores under zero parameters.
const INPUT_CENTER: f64 = 0.5;

fn input_act(pixels: &Array2<f64>) -> Act {
    let (h, w) = pixels.dim();
    Act::Image(
        pixels
            .mapv(|p| p - INPUT_CENTER)
            .to_shape((1, h, w))
            .expect("reshape cannot fail")
            .to_owned(),
    )
}

/// Deterministic forward pass on one stimulus. With `capture` set, the
/// output of every capture point is recorded (flattened row-major for
/// image-shaped activations).
pub fn forward(
    spec: &NetSpec,
    params: &Params,
    pixels: &Array2<f64>,
    capture: bool,
) -> Result<ForwardOutput> {
    check_input(spec, params, pixels)?;
    let mut act = input_act(pixels);
    // Slots keyed by capture-point position so the output order follows the
    // spec's list, not the layer order.
    let mut slots: Vec<Option<(String, Array1<f64>)>> =
        vec![None; if capture { spec.capture_points.len() } else { 0 }];
    for (i, (layer, lp)) in spec.layers.iter().zip(&params.layers).enumerate() {
        let (out, _) = layer_forward(layer, lp, act, false);
        if capture {
            for (k, point) in spec.capture_points.iter().enumerate() {
                if point.layer == i {
                    slots[k] = Some((point.name.clone(), out.flatten()));
                }
            }
        }
        act = out;
    }
    let logits = match act {
        Act::Vector(v) => v,
        Act::Image(_) => unreachable!("validated networks end in the score layer"),
    };
    Ok(ForwardOutput {
        logits,
        captures: slots.into_iter().flatten().collect(),
    })
}

/// Forward pass that records per-layer tapes for backpropagation.
fn forward_tracked(spec: &NetSpec, params: &Params, pixels: &Array2<f64>) -> (Array1<f64>, Vec<Tape>) {
    let mut act = input_act(pixels);
    let mut tapes = Vec::with_capacity(spec.layers.len());
    for (layer, lp) in spec.layers.iter().zip(&params.layers) {
        let (out, tape) = layer_forward(layer, lp, act, true);
        tapes.push(tape.expect("tracked pass always tapes"));
        act = out;
    }
    match act {
        Act::Vector(v) => (v, tapes),
        Act::Image(_) => unreachable!("validated networks end in the score layer"),
    }
}

pub(crate) fn log_sum_exp(v: &Array1<f64>) -> f64 {
    let m = v.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Softmax cross-entropy in nats for one stimulus.
pub(crate) fn cross_entropy(logits: &Array1<f64>, label: usize) -> f64 {
    log_sum_exp(logits) - logits[label]
}

fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let lse = log_sum_exp(logits);
    logits.mapv(|x| (x - lse).exp())
}

/// Index of the largest entry; ties break to the lowest index.
pub(crate) fn argmax(v: &Array1<f64>) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Loss, gradients, and prediction for a single labeled stimulus.
fn sample_grads(
    spec: &NetSpec,
    params: &Params,
    pixels: &Array2<f64>,
    label: usize,
) -> (Params, f64, bool) {
    let (logits, tapes) = forward_tracked(spec, params, pixels);
    let loss = cross_entropy(&logits, label);
    let correct = argmax(&logits) == label;
    let mut grad_logits = softmax(&logits);
    grad_logits[label] -= 1.0;

    let mut grad = Act::Vector(grad_logits);
    let mut layer_grads: Vec<LayerParams> = Vec::with_capacity(spec.layers.len());
    for i in (0..spec.layers.len()).rev() {
        let (gin, gparams) =
            layer_backward(&spec.layers[i], &params.layers[i], &tapes[i], grad);
        layer_grads.push(gparams);
        grad = gin;
    }
    layer_grads.reverse();
    (
        Params {
            layers: layer_grads,
            seed: params.seed,
        },
        loss,
        correct,
    )
}

/// Per-batch sums used by training: summed gradients, summed loss, and the
/// number of correct argmax predictions. Samples are processed
/// independently and folded in index order, so the result does not depend
/// on scheduling.
pub(crate) fn batch_sums(
    spec: &NetSpec,
    params: &Params,
    batch: &[Array2<f64>],
    labels: &[usize],
) -> Result<(Params, f64, usize)> {
    if batch.is_empty() {
        return Err(Error::EmptySet("gradient batch is empty".into()));
    }
    if batch.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} stimuli but {} labels",
            batch.len(),
            labels.len()
        )));
    }
    for &label in labels {
        if label >= spec.n_classes {
            return Err(Error::InvalidLabel {
                label,
                n_classes: spec.n_classes,
            });
        }
    }
    check_input(spec, params, &batch[0])?;
    let per_sample = exec::map_indexed(batch.len(), |i| {
        check_input(spec, params, &batch[i])?;
        Ok::<_, Error>(sample_grads(spec, params, &batch[i], labels[i]))
    });
    let mut total: Option<Params> = None;
    let mut loss_sum = 0.0;
    let mut n_correct = 0;
    for item in per_sample {
        let (g, loss, correct) = item?;
        loss_sum += loss;
        n_correct += correct as usize;
        match &mut total {
            Some(t) => t.add_assign(&g),
            None => total = Some(g),
        }
    }
    Ok((total.expect("nonempty batch"), loss_sum, n_correct))
}

/// Exact gradients of the mean softmax cross-entropy over a batch, with the
/// mean loss. Gradient tensors mirror the parameter tensors.
pub fn backprop(
    spec: &NetSpec,
    params: &Params,
    batch: &[Array2<f64>],
    labels: &[usize],
) -> Result<(Params, f64)> {
    spec.validate()?;
    let (mut grads, loss_sum, _) = batch_sums(spec, params, batch, labels)?;
    let scale = 1.0 / batch.len() as f64;
    grads.scale(scale);
    Ok((grads, loss_sum * scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::spec::{CapturePoint, LayerSpec};
    use ndarray::Array2;
    use rand::Rng;

    fn seeded_pixels(h: usize, w: usize, seed: u64) -> Array2<f64> {
        let mut rng = crate::seeding::rng(seed);
        Array2::from_shape_fn((h, w), |_| rng.gen_range(0.0..1.0))
    }

    /// Small network exercising every layer kind, including both residual
    /// skip forms and a rectifier on a vector activation.
    fn all_kinds_spec() -> NetSpec {
        NetSpec {
            layers: vec![
                LayerSpec::Conv3x3 {
                    channels: 2,
                    stride: 1,
                },
                LayerSpec::Relu,
                LayerSpec::ResidualBlock {
                    channels: 3,
                    stride: 2,
                },
                LayerSpec::ResidualBlock {
                    channels: 3,
                    stride: 1,
                },
                LayerSpec::GlobalAvgPool,
                LayerSpec::Dense { units: 4 },
                LayerSpec::Relu,
                LayerSpec::Logits,
            ],
            input_shape: (6, 6),
            n_classes: 3,
            capture_points: vec![
                CapturePoint {
                    name: "pool".into(),
                    layer: 4,
                },
                CapturePoint {
                    name: "stem".into(),
                    layer: 0,
                },
            ],
        }
    }

    fn flat_params(p: &Params) -> Vec<f64> {
        let mut v = Vec::new();
        p.for_each_slice(&mut |s| v.extend_from_slice(s));
        v
    }

    fn set_flat(p: &mut Params, flat: &[f64]) {
        let mut k = 0;
        p.for_each_slice_mut(&mut |s| {
            s.copy_from_slice(&flat[k..k + s.len()]);
            k += s.len();
        });
    }

    #[test]
    fn gradients_match_central_differences_for_every_layer_kind() {
        let spec = all_kinds_spec();
        let params = Params::init(&spec, 11).unwrap();
        let batch: Vec<Array2<f64>> = (0..3).map(|i| seeded_pixels(6, 6, 100 + i)).collect();
        let labels = vec![0, 1, 2];

        let (grads, _) = backprop(&spec, &params, &batch, &labels).unwrap();
        let analytic = flat_params(&grads);
        let theta = flat_params(&params);
        let h = 1e-5;

        let loss_at = |flat: &[f64]| {
            let mut p = params.clone();
            set_flat(&mut p, flat);
            let mut sum = 0.0;
            for (x, &y) in batch.iter().zip(&labels) {
                let out = forward(&spec, &p, x, false).unwrap();
                sum += cross_entropy(&out.logits, y);
            }
            sum / batch.len() as f64
        };

        let mut worst = 0.0f64;
        for i in 0..theta.len() {
            let mut plus = theta.clone();
            plus[i] += h;
            let mut minus = theta.clone();
            minus[i] -= h;
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic[i] - numeric).abs() / denom);
        }
        assert!(
            worst <= 1e-4,
            "worst relative gradient error {worst:.3e} over {} parameters",
            theta.len()
        );
    }

    #[test]
    fn zero_parameters_give_uniform_scores_and_log_k_loss() {
        let spec = all_kinds_spec();
        let params = Params::init(&spec, 1).unwrap().zeros_like();
        let x = seeded_pixels(6, 6, 5);
        let out = forward(&spec, &params, &x, false).unwrap();
        assert!(out.logits.iter().all(|&v| v == 0.0));
        let loss = cross_entropy(&out.logits, 0);
        assert!((loss - (3.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn duplicated_sample_gradient_is_weighted_mean() {
        let spec = all_kinds_spec();
        let params = Params::init(&spec, 21).unwrap();
        let x = seeded_pixels(6, 6, 31);
        let y = seeded_pixels(6, 6, 32);

        let (gx, _) = backprop(&spec, &params, &[x.clone()], &[0]).unwrap();
        let (gy, _) = backprop(&spec, &params, &[y.clone()], &[2]).unwrap();
        let (gmix, _) = backprop(&spec, &params, &[x.clone(), x, y], &[0, 0, 2]).unwrap();

        let fx = flat_params(&gx);
        let fy = flat_params(&gy);
        let fm = flat_params(&gmix);
        for i in 0..fm.len() {
            let want = (2.0 * fx[i] + fy[i]) / 3.0;
            assert!((fm[i] - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn saturated_net_has_vanishing_gradient() {
        let spec = all_kinds_spec();
        let mut params = Params::init(&spec, 2).unwrap().zeros_like();
        // Scores come from bias alone; push the true class far above the rest.
        if let LayerParams::Dense { bias, .. } = params.layers.last_mut().unwrap() {
            bias.fill(-50.0);
            bias[1] = 50.0;
        }
        let batch = vec![seeded_pixels(6, 6, 7), seeded_pixels(6, 6, 8)];
        let (grads, loss) = backprop(&spec, &params, &batch, &[1, 1]).unwrap();
        assert!(loss < 1e-8);
        let norm = flat_params(&grads).iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(norm < 1e-8, "gradient norm {norm}");
    }

    #[test]
    fn shifted_scores_keep_loss_and_argmax() {
        let mut rng = crate::seeding::rng(17);
        for _ in 0..20 {
            let v = Array1::from_shape_fn(6, |_| rng.gen_range(-3.0..3.0));
            let shifted = &v + 11.25;
            assert!((cross_entropy(&v, 2) - cross_entropy(&shifted, 2)).abs() < 1e-10);
            assert_eq!(argmax(&v), argmax(&shifted));
        }
    }

    #[test]
    fn argmax_is_increasing_transform_invariant_and_first_tie_wins() {
        let v = Array1::from_vec(vec![0.3, -1.0, 2.1, 2.1, 0.0]);
        assert_eq!(argmax(&v), 2);
        let warped = v.mapv(|x| (3.0 * x + 1.0).tanh() * 2.0 + x);
        assert_eq!(argmax(&warped), argmax(&v));
    }

    #[test]
    fn captures_are_reproducible_and_sized_by_spec() {
        let spec = all_kinds_spec();
        let params = Params::init(&spec, 9).unwrap();
        let x = seeded_pixels(6, 6, 40);
        let a = forward(&spec, &params, &x, true).unwrap();
        let b = forward(&spec, &params, &x, true).unwrap();
        assert_eq!(a.captures.len(), 2);
        assert_eq!(a.captures[0].0, "pool");
        assert_eq!(a.captures[0].1.len(), 3);
        assert_eq!(a.captures[1].0, "stem");
        assert_eq!(a.captures[1].1.len(), 2 * 6 * 6);
        for (ca, cb) in a.captures.iter().zip(&b.captures) {
            assert_eq!(ca.1, cb.1);
        }
        let c = forward(&spec, &params, &x, false).unwrap();
        assert!(c.captures.is_empty());
        assert_eq!(c.logits, a.logits);
    }

    #[test]
    fn wrong_input_shape_and_label_are_rejected() {
        let spec = all_kinds_spec();
        let params = Params::init(&spec, 3).unwrap();
        let bad = seeded_pixels(5, 6, 1);
        assert!(matches!(
            forward(&spec, &params, &bad, false),
            Err(Error::InvalidInput(_))
        ));
        let good = seeded_pixels(6, 6, 1);
        assert!(matches!(
            backprop(&spec, &params, &[good.clone()], &[3]),
            Err(Error::InvalidLabel {
                label: 3,
                n_classes: 3
            })
        ));
        assert!(matches!(
            backprop(&spec, &params, &[], &[]),
            Err(Error::EmptySet(_))
        ));
        assert!(matches!(
            backprop(&spec, &params, &[good], &[0, 1]),
            Err(Error::InvalidInput(_))
        ));
    }
}
