//! Dissimilarity matrices over score rows.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;

/// Pairwise (1 - Pearson) dissimilarity over trials, with block structure.
///
/// Block labels tag each row (for example with its viewpoint); the within and
/// between means summarize whether trials sharing a label look more alike
/// than trials that do not. Either mean is NaN when no pair of that kind
/// exists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rdm {
    pub matrix: Array2<f64>,
    pub block_labels: Vec<String>,
    pub within_block_mean: f64,
    pub between_block_mean: f64,
}

/// Dissimilarity matrix of `scores` rows: entry (i, j) = 1 - pearson(row i, row j).
pub fn rdm(scores: &Array2<f64>, block_labels: &[String]) -> Result<Rdm> {
    let (n, k) = scores.dim();
    if k < 2 {
        return Err(Error::InvalidData(format!(
            "pearson correlation needs at least 2 columns, got {k}"
        )));
    }
    if block_labels.len() != n {
        return Err(Error::InvalidData(format!(
            "{} block labels for {} rows",
            block_labels.len(),
            n
        )));
    }

    let mut centered = scores.clone();
    let mut norms = vec![0.0; n];
    for i in 0..n {
        let mut row = centered.row_mut(i);
        let scale = row.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let mean = row.sum() / k as f64;
        row.mapv_inplace(|x| x - mean);
        let norm = row.dot(&row).sqrt();
        if !norm.is_finite() || norm <= 1e-12 * scale.max(1e-300) {
            return Err(Error::DegenerateRow { index: i });
        }
        norms[i] = norm;
    }

    let rows = exec::map_indexed(n, |i| {
        let ri = centered.row(i);
        (i..n)
            .map(|j| {
                let r = ri.dot(&centered.row(j)) / (norms[i] * norms[j]);
                1.0 - r.clamp(-1.0, 1.0)
            })
            .collect::<Vec<f64>>()
    });

    let mut matrix = Array2::<f64>::zeros((n, n));
    for (i, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            matrix[[i, j]] = v;
            matrix[[j, i]] = v;
        }
        matrix[[i, i]] = 0.0;
    }

    let (mut within_sum, mut within_n) = (0.0, 0usize);
    let (mut between_sum, mut between_n) = (0.0, 0usize);
    for i in 0..n {
        for j in (i + 1)..n {
            if block_labels[i] == block_labels[j] {
                within_sum += matrix[[i, j]];
                within_n += 1;
            } else {
                between_sum += matrix[[i, j]];
                between_n += 1;
            }
        }
    }

    Ok(Rdm {
        matrix,
        block_labels: block_labels.to_vec(),
        within_block_mean: if within_n > 0 {
            within_sum / within_n as f64
        } else {
            f64::NAN
        },
        between_block_mean: if between_n > 0 {
            between_sum / between_n as f64
        } else {
            f64::NAN
        },
    })
}
