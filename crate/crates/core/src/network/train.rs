//! Mini-batch training loop, evaluation, and activation capture.
//!
//! Training is one logical sequence: the split, the per-epoch batch order,
//! and the per-image augmentation draws all come from child seeds of the run
//! seed, so the same configuration reproduces the same parameters bit for
//! bit. Per-sample gradients inside a batch may be computed in parallel but
//! are folded in index order.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::grid;
use crate::seeding;

use super::net::{argmax, batch_sums, cross_entropy, forward};
use super::params::Params;
use super::spec::NetSpec;

/// Fill value for pixels exposed by augmentation shifts, matching the
/// renderer's background level.
const AUGMENT_BACKGROUND: f64 = 0.5;

/// Training hyperparameters and augmentation ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Fraction of stimuli assigned to the training split.
    pub split_fraction: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Augmentation zoom factor range, inclusive.
    pub scale_range: (f64, f64),
    /// Augmentation shift magnitude range as a fraction of image size;
    /// each axis draws a magnitude and a sign.
    pub translation_range: (f64, f64),
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            split_fraction: 0.6,
            batch_size: 16,
            learning_rate: 0.05,
            momentum: 0.9,
            epochs: 10,
            scale_range: (1.0, 2.0),
            translation_range: (0.0, 0.3),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "split fraction {} must lie strictly between 0 and 1",
                self.split_fraction
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epoch count must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be positive and finite",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum {} must lie in [0, 1)",
                self.momentum
            )));
        }
        let (s_lo, s_hi) = self.scale_range;
        if !(s_lo > 0.0 && s_lo <= s_hi && s_hi.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "scale range [{s_lo}, {s_hi}] must be positive and ordered"
            )));
        }
        let (t_lo, t_hi) = self.translation_range;
        if !(t_lo >= 0.0 && t_lo <= t_hi && t_hi.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "translation range [{t_lo}, {t_hi}] must be nonnegative and ordered"
            )));
        }
        Ok(())
    }
}

/// Per-epoch metrics. Training loss and accuracy are accumulated over the
/// epoch's augmented batches; test metrics are computed on the held-out
/// split without augmentation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub test_loss: Vec<f64>,
    pub test_accuracy: Vec<f64>,
}

/// Output of a capture run at one named point: one row per trial, one
/// column per unit, rows in trial order.
#[derive(Debug, Clone)]
pub struct ActivationCapture {
    pub layer_name: String,
    pub matrix: Array2<f64>,
}

fn draw_in(rng: &mut impl Rng, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.gen_range(range.0..=range.1)
    }
}

/// Seeded zoom-and-shift augmentation for one image. The draw depends only
/// on the run seed, the epoch, and the image's index in the full dataset.
fn augment(image: &Array2<f64>, config: &TrainConfig, epoch: usize, index: usize) -> Array2<f64> {
    let child = seeding::split_indexed(
        config.seed,
        "train.augment",
        (epoch as u64) << 32 | index as u64,
    );
    let mut rng = seeding::rng(child);
    let scale = draw_in(&mut rng, config.scale_range);
    let mut tx = draw_in(&mut rng, config.translation_range);
    if rng.gen::<bool>() {
        tx = -tx;
    }
    let mut ty = draw_in(&mut rng, config.translation_range);
    if rng.gen::<bool>() {
        ty = -ty;
    }
    grid::scale_translate(image, scale, tx, ty, AUGMENT_BACKGROUND)
}

/// Mean loss and accuracy of `params` on the indexed subset, no augmentation.
fn subset_metrics(
    spec: &NetSpec,
    params: &Params,
    images: &[Array2<f64>],
    labels: &[usize],
    idx: &[usize],
) -> Result<(f64, f64)> {
    let per = exec::map_indexed(idx.len(), |k| {
        let i = idx[k];
        let out = forward(spec, params, &images[i], false)?;
        Ok::<_, Error>((
            cross_entropy(&out.logits, labels[i]),
            argmax(&out.logits) == labels[i],
        ))
    });
    let mut loss = 0.0;
    let mut correct = 0usize;
    for item in per {
        let (l, c) = item?;
        loss += l;
        correct += c as usize;
    }
    let n = idx.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Train a fresh network on labeled stimuli.
///
/// The dataset is split once into train and held-out parts, then optimized
/// with momentum gradient descent over shuffled mini-batches of augmented
/// images. Returns the final parameters and per-epoch history. A non-finite
/// batch loss aborts with a divergence error.
pub fn train(
    spec: &NetSpec,
    images: &[Array2<f64>],
    labels: &[usize],
    config: &TrainConfig,
) -> Result<(Params, TrainHistory)> {
    spec.validate()?;
    config.validate()?;
    if images.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} stimuli but {} labels",
            images.len(),
            labels.len()
        )));
    }
    if images.len() < 2 {
        return Err(Error::InsufficientSamples {
            need: 2,
            got: images.len(),
        });
    }
    for &label in labels {
        if label >= spec.n_classes {
            return Err(Error::InvalidLabel {
                label,
                n_classes: spec.n_classes,
            });
        }
    }

    let n = images.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeding::rng(seeding::split(config.seed, "train.split")));
    let n_train = ((config.split_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let train_idx = order[..n_train].to_vec();
    let test_idx = order[n_train..].to_vec();

    let mut train_classes: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    train_classes.sort_unstable();
    train_classes.dedup();
    if train_classes.len() < 2 {
        return Err(Error::InvalidConfig(
            "training split holds fewer than two classes".into(),
        ));
    }

    let mut params = Params::init(spec, config.seed)?;
    let mut velocity = params.zeros_like();
    let mut history = TrainHistory::default();

    for epoch in 0..config.epochs {
        let mut epoch_order = train_idx.clone();
        epoch_order.shuffle(&mut seeding::rng(seeding::split_indexed(
            config.seed,
            "train.shuffle",
            epoch as u64,
        )));

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in epoch_order.chunks(config.batch_size) {
            let batch: Vec<Array2<f64>> = chunk
                .iter()
                .map(|&i| augment(&images[i], config, epoch, i))
                .collect();
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (mut grads, batch_loss_sum, batch_correct) =
                batch_sums(spec, &params, &batch, &batch_labels)?;
            if !batch_loss_sum.is_finite() {
                return Err(Error::TrainingDiverged(format!(
                    "non-finite loss in epoch {epoch}"
                )));
            }
            grads.scale(1.0 / chunk.len() as f64);
            params.sgd_update(&mut velocity, &grads, config.learning_rate, config.momentum);
            loss_sum += batch_loss_sum;
            correct += batch_correct;
        }

        history.train_loss.push(loss_sum / n_train as f64);
        history
            .train_accuracy
            .push(correct as f64 / n_train as f64);
        let (test_loss, test_acc) = subset_metrics(spec, &params, images, labels, &test_idx)?;
        history.test_loss.push(test_loss);
        history.test_accuracy.push(test_acc);
    }

    if !params.all_finite() {
        return Err(Error::TrainingDiverged(
            "non-finite parameter after final update".into(),
        ));
    }
    Ok((params, history))
}

/// Fraction of stimuli classified as `target_id`, plus the raw pre-argmax
/// score of the target unit for every stimulus in trial order.
pub fn evaluate(
    spec: &NetSpec,
    params: &Params,
    stimuli: &[Array2<f64>],
    target_id: usize,
) -> Result<(f64, Vec<f64>)> {
    if stimuli.is_empty() {
        return Err(Error::EmptySet(
            "accuracy over zero stimuli is undefined".into(),
        ));
    }
    if target_id >= spec.n_classes {
        return Err(Error::InvalidLabel {
            label: target_id,
            n_classes: spec.n_classes,
        });
    }
    let per = exec::map_indexed(stimuli.len(), |i| {
        let out = forward(spec, params, &stimuli[i], false)?;
        Ok::<_, Error>((argmax(&out.logits) == target_id, out.logits[target_id]))
    });
    let mut hits = 0usize;
    let mut target_logits = Vec::with_capacity(stimuli.len());
    for item in per {
        let (hit, logit) = item?;
        hits += hit as usize;
        target_logits.push(logit);
    }
    Ok((hits as f64 / stimuli.len() as f64, target_logits))
}

/// Predicted class per stimulus, in trial order.
pub fn classify(spec: &NetSpec, params: &Params, stimuli: &[Array2<f64>]) -> Result<Vec<usize>> {
    if stimuli.is_empty() {
        return Err(Error::EmptySet("no stimuli to classify".into()));
    }
    let per = exec::map_indexed(stimuli.len(), |i| {
        let out = forward(spec, params, &stimuli[i], false)?;
        Ok::<_, Error>(argmax(&out.logits))
    });
    per.into_iter().collect()
}

/// Run every stimulus through the network and collect the activation matrix
/// of each capture point, in spec order. Row `t` of every matrix comes from
/// stimulus `t`.
pub fn capture_activations(
    spec: &NetSpec,
    params: &Params,
    stimuli: &[Array2<f64>],
) -> Result<Vec<ActivationCapture>> {
    if stimuli.is_empty() {
        return Err(Error::EmptySet("no stimuli to capture".into()));
    }
    spec.validate()?;
    let rows = exec::map_indexed(stimuli.len(), |i| {
        let out = forward(spec, params, &stimuli[i], true)?;
        Ok::<_, Error>(out.captures)
    });
    let mut collected: Vec<Vec<Array1<f64>>> =
        (0..spec.capture_points.len()).map(|_| Vec::new()).collect();
    for row in rows {
        let captures = row?;
        for (k, (_, values)) in captures.into_iter().enumerate() {
            collected[k].push(values);
        }
    }
    let mut out = Vec::with_capacity(spec.capture_points.len());
    for (point, rows) in spec.capture_points.iter().zip(collected) {
        let width = rows[0].len();
        let mut matrix = Array2::zeros((stimuli.len(), width));
        for (t, row) in rows.into_iter().enumerate() {
            matrix.row_mut(t).assign(&row);
        }
        out.push(ActivationCapture {
            layer_name: point.name.clone(),
            matrix,
        });
    }
    Ok(out)
}
