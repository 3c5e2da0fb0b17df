//! Householder QR and least squares.

use ndarray::{s, Array1, Array2};

use crate::error::{Error, Result};

/// Thin QR factorization of an n x p matrix (n >= p): returns (Q, R) with
/// Q n x p having orthonormal columns and R p x p upper triangular.
pub fn qr_thin(a: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (n, p) = a.dim();
    assert!(n >= p, "qr_thin expects n >= p, got {n} x {p}");
    let mut r = a.clone();
    // Householder vectors, one per column, stored dense.
    let mut vs: Vec<Array1<f64>> = Vec::with_capacity(p);

    for k in 0..p {
        let x = r.slice(s![k.., k]).to_owned();
        let norm_x = x.dot(&x).sqrt();
        let mut v = x;
        if norm_x > 0.0 {
            let alpha = if v[0] >= 0.0 { -norm_x } else { norm_x };
            v[0] -= alpha;
            let norm_v = v.dot(&v).sqrt();
            if norm_v > 0.0 {
                v /= norm_v;
            }
        }
        // Apply H = I - 2 v v^T to the trailing block of R.
        for j in k..p {
            let col = r.slice(s![k.., j]).to_owned();
            let proj = 2.0 * v.dot(&col);
            let mut target = r.slice_mut(s![k.., j]);
            for (t, &vi) in target.iter_mut().zip(v.iter()) {
                *t -= proj * vi;
            }
        }
        vs.push(v);
    }

    // Accumulate Q by applying the reflectors in reverse to the first p
    // columns of the identity.
    let mut q = Array2::<f64>::zeros((n, p));
    for j in 0..p {
        q[[j, j]] = 1.0;
    }
    for k in (0..p).rev() {
        let v = &vs[k];
        for j in 0..p {
            let col = q.slice(s![k.., j]).to_owned();
            let proj = 2.0 * v.dot(&col);
            let mut target = q.slice_mut(s![k.., j]);
            for (t, &vi) in target.iter_mut().zip(v.iter()) {
                *t -= proj * vi;
            }
        }
    }

    let r_small = r.slice(s![..p, ..p]).to_owned();
    (q, r_small)
}

/// Least-squares solution of `design * B = targets` via QR.
///
/// `design` is n x p (n >= p, full column rank), `targets` n x d; returns the
/// p x d coefficient matrix. Rank deficiency is detected from the R diagonal.
pub fn least_squares(design: &Array2<f64>, targets: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, p) = design.dim();
    if targets.nrows() != n {
        return Err(Error::InvalidData(format!(
            "design has {n} rows but targets has {}",
            targets.nrows()
        )));
    }
    if n < p {
        return Err(Error::RankDeficientDesign(format!(
            "fewer rows ({n}) than columns ({p})"
        )));
    }
    let (q, r) = qr_thin(design);
    let diag_max = (0..p).map(|i| r[[i, i]].abs()).fold(0.0_f64, f64::max);
    let tol = 1e-10 * diag_max.max(1.0);
    for i in 0..p {
        if r[[i, i]].abs() <= tol {
            return Err(Error::RankDeficientDesign(format!(
                "R[{i},{i}] = {:.3e} below tolerance {:.3e}",
                r[[i, i]],
                tol
            )));
        }
    }
    let qtb = q.t().dot(targets); // p x d
    let d = qtb.ncols();
    let mut b = Array2::<f64>::zeros((p, d));
    for col in 0..d {
        // Back substitution.
        for i in (0..p).rev() {
            let mut acc = qtb[[i, col]];
            for j in (i + 1)..p {
                acc -= r[[i, j]] * b[[j, col]];
            }
            b[[i, col]] = acc / r[[i, i]];
        }
    }
    Ok(b)
}
