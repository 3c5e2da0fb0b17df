//! Cholesky factorization and log-determinants.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Lower Cholesky factor plus the smallest squared pivot encountered.
///
/// The smallest pivot lets callers apply their own degeneracy rules (the MI
/// estimator treats a pivot explained by its ridge as a degenerate variable
/// set rather than a numerical success).
pub fn chol_factor(a: &Array2<f64>) -> Result<(Array2<f64>, f64)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidData(format!(
            "cholesky needs a square matrix, got {} x {}",
            n,
            a.ncols()
        )));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    let mut min_pivot_sq = f64::INFINITY;
    for i in 0..n {
        for j in 0..=i {
            let mut acc = a[[i, j]];
            for k in 0..j {
                acc -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(acc > 0.0) || !acc.is_finite() {
                    return Err(Error::NotPositiveDefinite(format!(
                        "pivot {i} is {acc:.3e}"
                    )));
                }
                min_pivot_sq = min_pivot_sq.min(acc);
                l[[i, j]] = acc.sqrt();
            } else {
                l[[i, j]] = acc / l[[j, j]];
            }
        }
    }
    Ok((l, min_pivot_sq))
}

/// Log-determinant (natural log) of a symmetric positive definite matrix.
pub fn chol_logdet(a: &Array2<f64>) -> Result<f64> {
    let (l, _) = chol_factor(a)?;
    let mut logdet = 0.0;
    for i in 0..a.nrows() {
        logdet += l[[i, i]].ln();
    }
    Ok(2.0 * logdet)
}
