//! Max-statistic permutation nulls for feature maps.

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::copula::copula_transform;
use super::gcmi::mi_bits_from_cov;
use crate::error::{Error, Result};
use crate::exec;
use crate::seeding;

/// Null distribution of the maximum per-feature MI under response shuffling.
/// Thresholding a map at `percentile_95` controls the family-wise error rate
/// across all features at the nominal 5% level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PermutationNull {
    pub n_permutations: usize,
    /// Ascending; one max-over-features MI (bits) per permutation.
    pub null_max_distribution: Vec<f64>,
    pub percentile_95: f64,
    pub seed: u64,
}

/// Build the max-statistic null for MI between feature groups of `s` and
/// `response`.
///
/// Features are consecutive `dims_per_feature`-column groups of `s`. Each
/// permutation shuffles response rows with its own seeded generator split
/// from `seed`, recomputes every per-feature MI, and records the maximum.
/// Features that are degenerate (constant columns) are skipped, matching the
/// map pipeline, which flags them instead of estimating.
pub fn permutation_null(
    s: &Array2<f64>,
    response: &Array2<f64>,
    dims_per_feature: usize,
    bias_correct: bool,
    n_perm: usize,
    seed: u64,
) -> Result<PermutationNull> {
    if n_perm < 100 {
        return Err(Error::InsufficientPermutations {
            need: 100,
            got: n_perm,
        });
    }
    if dims_per_feature == 0 || s.ncols() % dims_per_feature != 0 {
        return Err(Error::InvalidData(format!(
            "{} feature columns do not split into groups of {dims_per_feature}",
            s.ncols()
        )));
    }
    let n = s.nrows();
    if response.nrows() != n {
        return Err(Error::InvalidData(format!(
            "{} feature rows vs {} response rows",
            n,
            response.nrows()
        )));
    }
    let n_features = s.ncols() / dims_per_feature;
    let df = dims_per_feature;
    let dr = response.ncols();

    let mut zs = copula_transform(s)?.data().clone();
    let mut zr0 = copula_transform(response)?.data().clone();
    for j in 0..zs.ncols() {
        let m = zs.column(j).sum() / n as f64;
        zs.column_mut(j).mapv_inplace(|v| v - m);
    }
    for j in 0..dr {
        let m = zr0.column(j).sum() / n as f64;
        zr0.column_mut(j).mapv_inplace(|v| v - m);
    }
    let denom = n as f64 - 1.0;
    let cov_s = zs.t().dot(&zs) / denom;
    let cov_r = zr0.t().dot(&zr0) / denom;

    let maxima: Vec<Result<f64>> = exec::map_indexed(n_perm, |p| {
        let mut rng = seeding::rng(seeding::split_indexed(seed, "perm.shuffle", p as u64));
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut zr = Array2::<f64>::zeros((n, dr));
        for (i, &src) in perm.iter().enumerate() {
            zr.row_mut(i).assign(&zr0.row(src));
        }
        let cross = zs.t().dot(&zr) / denom;

        let mut best: Option<f64> = None;
        for f in 0..n_features {
            let c0 = f * df;
            let d = df + dr;
            let mut joint = Array2::<f64>::zeros((d, d));
            joint
                .slice_mut(s![..df, ..df])
                .assign(&cov_s.slice(s![c0..c0 + df, c0..c0 + df]));
            joint
                .slice_mut(s![df.., df..])
                .assign(&cov_r);
            joint
                .slice_mut(s![..df, df..])
                .assign(&cross.slice(s![c0..c0 + df, ..]));
            joint
                .slice_mut(s![df.., ..df])
                .assign(&cross.slice(s![c0..c0 + df, ..]).t());
            match mi_bits_from_cov(&joint, df, n, bias_correct, "feature", "response") {
                Ok(v) => best = Some(best.map_or(v, |b: f64| b.max(v))),
                Err(Error::DegenerateVariables(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        best.ok_or_else(|| {
            Error::DegenerateVariables(
                "every feature was degenerate under permutation".into(),
            )
        })
    });

    let mut null: Vec<f64> = Vec::with_capacity(n_perm);
    for m in maxima {
        null.push(m?);
    }
    null.sort_by(|a, b| a.partial_cmp(b).expect("finite MI"));
    let rank = ((0.95 * n_perm as f64).ceil() as usize).max(1) - 1;
    let percentile_95 = null[rank.min(n_perm - 1)];

    Ok(PermutationNull {
        n_permutations: n_perm,
        null_max_distribution: null,
        percentile_95,
        seed,
    })
}
