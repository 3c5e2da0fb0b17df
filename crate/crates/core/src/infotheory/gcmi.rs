//! Gaussian mutual information and co-information on copula data.
//!
//! After copula normalization, MI between variable groups reduces to Gaussian
//! entropies of covariance sub-blocks, H = sum(ln diag L) + d/2 ln(2*pi*e) in
//! nats via Cholesky. Every covariance in one call gets the same absolute
//! ridge, derived from the trace of the largest joint block; this keeps the
//! chain and redundancy bounds exact properties of one consistent matrix
//! rather than near-misses between independently regularized ones.

use std::f64::consts::{LN_2, PI};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::copula::CopulaMatrix;
use super::special::digamma;
use crate::error::{Error, Result};
use crate::linalg::chol_factor;

const RIDGE_SCALE: f64 = 1e-12;
/// A Cholesky pivot below this multiple of the ridge means the variable adds
/// no variance of its own: degenerate, not merely ill-conditioned.
const DEGENERACY_FACTOR: f64 = 100.0;

/// Mutual information between two variable groups, in bits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MiEstimate {
    /// May dip slightly below zero under bias correction.
    pub bits: f64,
    pub n_samples: usize,
    pub dims_x: usize,
    pub dims_y: usize,
    pub bias_corrected: bool,
}

/// Co-information Red(S;L;R) = MI(S;L) + MI(S;R) - MI(S;[L R]), in bits.
/// Positive when L and R carry overlapping information about S; negative
/// under synergy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RedEstimate {
    pub bits: f64,
    /// MI(S;L), MI(S;R), MI(S;[L R]) in that order; `bits` is exactly
    /// component_mi[0] + component_mi[1] - component_mi[2].
    pub component_mi: [f64; 3],
    pub n_samples: usize,
    pub bias_corrected: bool,
}

/// Column covariance of copula data after removing column means.
fn covariance(z: &ArrayView2<f64>) -> Array2<f64> {
    let (n, d) = z.dim();
    let mut centered = z.to_owned();
    for j in 0..d {
        let mean = centered.column(j).sum() / n as f64;
        centered.column_mut(j).mapv_inplace(|v| v - mean);
    }
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    cov
}

/// Shared absolute ridge for one estimation call: scaled mean variance of the
/// full joint block.
fn joint_ridge(cov: &Array2<f64>) -> f64 {
    let d = cov.nrows();
    RIDGE_SCALE * cov.diag().sum() / d as f64
}

/// Gaussian entropy (nats) of the covariance sub-block indexed by `idx`.
fn entropy_nats(
    cov: &Array2<f64>,
    idx: &[usize],
    ridge: f64,
    n: usize,
    bias_correct: bool,
    label: &str,
) -> Result<f64> {
    let d = idx.len();
    let mut block = Array2::<f64>::zeros((d, d));
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            block[[a, b]] = cov[[i, j]];
        }
    }
    for a in 0..d {
        block[[a, a]] += ridge;
    }
    let (l, min_pivot_sq) = match chol_factor(&block) {
        Ok(v) => v,
        Err(Error::NotPositiveDefinite(detail)) => {
            return Err(Error::DegenerateVariables(format!(
                "covariance of {label} is singular ({detail})"
            )))
        }
        Err(e) => return Err(e),
    };
    if min_pivot_sq < DEGENERACY_FACTOR * ridge {
        return Err(Error::DegenerateVariables(format!(
            "{label} carries a conditional variance {min_pivot_sq:.3e} explained by the ridge {ridge:.3e}"
        )));
    }
    let mut h: f64 = (0..d).map(|i| l[[i, i]].ln()).sum();
    h += 0.5 * d as f64 * (1.0 + (2.0 * PI).ln());
    if bias_correct {
        let dterm = (LN_2 - ((n - 1) as f64).ln()) / 2.0;
        let psiterms: f64 = (1..=d).map(|k| digamma((n - k) as f64 / 2.0) / 2.0).sum();
        h -= d as f64 * dterm + psiterms;
    }
    Ok(h)
}

/// MI (bits) straight from a joint covariance whose first `dx` rows/columns
/// are the x group. Applies the same trace ridge rule as `gaussian_mi`; used
/// by the permutation null, which rebuilds joint covariances incrementally.
pub(crate) fn mi_bits_from_cov(
    cov: &Array2<f64>,
    dx: usize,
    n: usize,
    bias_correct: bool,
    label_x: &str,
    label_y: &str,
) -> Result<f64> {
    let d = cov.nrows();
    let ridge = joint_ridge(cov);
    let idx_x: Vec<usize> = (0..dx).collect();
    let idx_y: Vec<usize> = (dx..d).collect();
    mi_bits(cov, &idx_x, &idx_y, ridge, n, bias_correct, label_x, label_y)
}

fn mi_bits(
    cov: &Array2<f64>,
    idx_x: &[usize],
    idx_y: &[usize],
    ridge: f64,
    n: usize,
    bias_correct: bool,
    label_x: &str,
    label_y: &str,
) -> Result<f64> {
    let idx_xy: Vec<usize> = idx_x.iter().chain(idx_y.iter()).copied().collect();
    let hx = entropy_nats(cov, idx_x, ridge, n, bias_correct, label_x)?;
    let hy = entropy_nats(cov, idx_y, ridge, n, bias_correct, label_y)?;
    let label_xy = format!("[{label_x} {label_y}]");
    let hxy = entropy_nats(cov, &idx_xy, ridge, n, bias_correct, &label_xy)?;
    Ok((hx + hy - hxy) / LN_2)
}

/// MI between two copula-normalized variable groups, in bits.
///
/// The joint covariance of [x | y] is ridged by 1e-12 x (trace / dims); a
/// group whose conditional variance is explained by that ridge (an exact
/// duplicate, a constant) is reported as degenerate rather than estimated.
pub fn gaussian_mi(x: &CopulaMatrix, y: &CopulaMatrix, bias_correct: bool) -> Result<MiEstimate> {
    if x.n_samples() != y.n_samples() {
        return Err(Error::InvalidData(format!(
            "x has {} samples, y has {}",
            x.n_samples(),
            y.n_samples()
        )));
    }
    let joint = CopulaMatrix::concat(x, y)?;
    let cov = covariance(&joint.data().view());
    let ridge = joint_ridge(&cov);
    let n = x.n_samples();
    let (dx, dy) = (x.n_dims(), y.n_dims());
    let idx_x: Vec<usize> = (0..dx).collect();
    let idx_y: Vec<usize> = (dx..dx + dy).collect();
    let bits = mi_bits(&cov, &idx_x, &idx_y, ridge, n, bias_correct, "x", "y")?;
    Ok(MiEstimate {
        bits,
        n_samples: n,
        dims_x: dx,
        dims_y: dy,
        bias_corrected: bias_correct,
    })
}

/// Co-information of s with the pair (l, r).
///
/// All three MI terms come from one covariance of [s | l | r] under one
/// ridge, so MI(s;[l r]) dominates each pairwise term and the redundancy
/// bound Red <= min(MI(s;l), MI(s;r)) holds to floating-point accuracy
/// (uncorrected estimates).
pub fn co_information(
    s: &CopulaMatrix,
    l: &CopulaMatrix,
    r: &CopulaMatrix,
    bias_correct: bool,
) -> Result<RedEstimate> {
    let n = s.n_samples();
    if l.n_samples() != n || r.n_samples() != n {
        return Err(Error::InvalidData(format!(
            "sample counts differ: s {}, l {}, r {}",
            n,
            l.n_samples(),
            r.n_samples()
        )));
    }
    let joint = CopulaMatrix::concat(&CopulaMatrix::concat(s, l)?, r)?;
    let cov = covariance(&joint.data().view());
    let ridge = joint_ridge(&cov);
    let (ds, dl, dr) = (s.n_dims(), l.n_dims(), r.n_dims());
    let idx_s: Vec<usize> = (0..ds).collect();
    let idx_l: Vec<usize> = (ds..ds + dl).collect();
    let idx_r: Vec<usize> = (ds + dl..ds + dl + dr).collect();
    let idx_lr: Vec<usize> = idx_l.iter().chain(idx_r.iter()).copied().collect();

    let mi_sl = mi_bits(&cov, &idx_s, &idx_l, ridge, n, bias_correct, "s", "l")?;
    let mi_sr = mi_bits(&cov, &idx_s, &idx_r, ridge, n, bias_correct, "s", "r")?;
    let mi_slr = mi_bits(&cov, &idx_s, &idx_lr, ridge, n, bias_correct, "s", "[l r]")?;

    Ok(RedEstimate {
        bits: mi_sl + mi_sr - mi_slr,
        component_mi: [mi_sl, mi_sr, mi_slr],
        n_samples: n,
        bias_corrected: bias_correct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::copula::copula_transform;
    use crate::seeding;
    use ndarray::Array2;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = seeding::rng(seed);
        Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal))
    }

    fn correlated_pair(n: usize, rho: f64, seed: u64) -> (Array2<f64>, Array2<f64>) {
        let mut rng = seeding::rng(seed);
        let mut x = Array2::<f64>::zeros((n, 1));
        let mut y = Array2::<f64>::zeros((n, 1));
        let noise = (1.0 - rho * rho).sqrt();
        for i in 0..n {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            x[[i, 0]] = a;
            y[[i, 0]] = rho * a + noise * b;
        }
        (x, y)
    }

    #[test]
    fn independent_variables_give_near_zero_mi() {
        let x = copula_transform(&normal_matrix(10_000, 1, 1)).unwrap();
        let y = copula_transform(&normal_matrix(10_000, 1, 2)).unwrap();
        let mi = gaussian_mi(&x, &y, true).unwrap();
        assert!(mi.bits.abs() <= 0.01, "got {}", mi.bits);
    }

    #[test]
    fn correlated_gaussian_matches_analytic_value() {
        let (x, y) = correlated_pair(10_000, 0.8, 3);
        let cx = copula_transform(&x).unwrap();
        let cy = copula_transform(&y).unwrap();
        let mi = gaussian_mi(&cx, &cy, true).unwrap();
        let analytic = -0.5 * (1.0_f64 - 0.64).log2();
        assert!((mi.bits - analytic).abs() <= 0.02, "got {}", mi.bits);
    }

    #[test]
    fn duplicated_variable_is_degenerate() {
        let x = copula_transform(&normal_matrix(500, 1, 4)).unwrap();
        match gaussian_mi(&x, &x, false) {
            Err(Error::DegenerateVariables(_)) => {}
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let x = copula_transform(&normal_matrix(100, 1, 5)).unwrap();
        let y = copula_transform(&normal_matrix(101, 1, 6)).unwrap();
        assert!(matches!(
            gaussian_mi(&x, &y, false),
            Err(Error::InvalidData(_))
        ));
    }

    #[test]
    fn mi_symmetric_in_arguments() {
        let (x, y) = correlated_pair(2_000, 0.6, 7);
        let cx = copula_transform(&x).unwrap();
        let cy = copula_transform(&y).unwrap();
        let a = gaussian_mi(&cx, &cy, false).unwrap().bits;
        let b = gaussian_mi(&cy, &cx, false).unwrap().bits;
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn invariant_under_monotone_remapping() {
        let (x, y) = correlated_pair(2_000, 0.5, 8);
        let mapped = x.mapv(|v| (v * 0.7).exp() + v.powi(3));
        let base = gaussian_mi(
            &copula_transform(&x).unwrap(),
            &copula_transform(&y).unwrap(),
            false,
        )
        .unwrap()
        .bits;
        let warped = gaussian_mi(
            &copula_transform(&mapped).unwrap(),
            &copula_transform(&y).unwrap(),
            false,
        )
        .unwrap()
        .bits;
        assert!((base - warped).abs() < 1e-9);
    }

    #[test]
    fn shared_source_coinformation_matches_analytic_value() {
        let n = 20_000;
        let mut rng = seeding::rng(9);
        let mut s = Array2::<f64>::zeros((n, 1));
        let mut l = Array2::<f64>::zeros((n, 1));
        let mut r = Array2::<f64>::zeros((n, 1));
        for i in 0..n {
            let src: f64 = rng.sample(StandardNormal);
            let e1: f64 = rng.sample(StandardNormal);
            let e2: f64 = rng.sample(StandardNormal);
            s[[i, 0]] = src;
            l[[i, 0]] = src + e1;
            r[[i, 0]] = src + e2;
        }
        let red = co_information(
            &copula_transform(&s).unwrap(),
            &copula_transform(&l).unwrap(),
            &copula_transform(&r).unwrap(),
            true,
        )
        .unwrap();
        let analytic = 1.0 - 0.5 * 3.0_f64.log2();
        assert!(
            (red.bits - analytic).abs() <= 0.03,
            "got {}, want {analytic}",
            red.bits
        );
        assert_eq!(
            red.bits,
            red.component_mi[0] + red.component_mi[1] - red.component_mi[2]
        );
    }

    #[test]
    fn independent_source_gives_near_zero_coinformation() {
        let s = copula_transform(&normal_matrix(10_000, 1, 10)).unwrap();
        let l = copula_transform(&normal_matrix(10_000, 1, 11)).unwrap();
        let r = copula_transform(&normal_matrix(10_000, 1, 12)).unwrap();
        let red = co_information(&s, &l, &r, true).unwrap();
        assert!(red.bits.abs() <= 0.02, "got {}", red.bits);
    }

    #[test]
    fn duplicated_channel_redundancy_equals_single_channel_mi() {
        let n = 20_000;
        let mut rng = seeding::rng(13);
        let mut s = Array2::<f64>::zeros((n, 1));
        let mut l = Array2::<f64>::zeros((n, 1));
        let mut r = Array2::<f64>::zeros((n, 1));
        for i in 0..n {
            let src: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            let jitter: f64 = rng.sample(StandardNormal);
            s[[i, 0]] = src;
            r[[i, 0]] = src + e;
            l[[i, 0]] = r[[i, 0]] + 1e-3 * jitter;
        }
        let red = co_information(
            &copula_transform(&s).unwrap(),
            &copula_transform(&l).unwrap(),
            &copula_transform(&r).unwrap(),
            true,
        )
        .unwrap();
        let mi_sr = red.component_mi[1];
        assert!((mi_sr - 0.5).abs() <= 0.02, "MI(s;r) = {mi_sr}");
        assert!((red.bits - mi_sr).abs() <= 0.03, "red {} vs {}", red.bits, mi_sr);
    }

    #[test]
    fn multivariate_groups_supported() {
        let n = 5_000;
        let mut rng = seeding::rng(14);
        let mut x = Array2::<f64>::zeros((n, 2));
        let mut y = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let c: f64 = rng.sample(StandardNormal);
            let d: f64 = rng.sample(StandardNormal);
            x[[i, 0]] = a;
            x[[i, 1]] = b;
            y[[i, 0]] = 0.7 * a + c;
            y[[i, 1]] = 0.7 * b + d;
        }
        let mi = gaussian_mi(
            &copula_transform(&x).unwrap(),
            &copula_transform(&y).unwrap(),
            true,
        )
        .unwrap();
        // two independent rho^2 = 0.49/1.49 channels
        let rho_sq: f64 = 0.49 / 1.49;
        let analytic = -(1.0 - rho_sq).log2();
        assert!((mi.bits - analytic).abs() <= 0.05, "got {}", mi.bits);
        assert_eq!(mi.dims_x, 2);
        assert_eq!(mi.dims_y, 2);
    }
}
