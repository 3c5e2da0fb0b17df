//! One-sided Jacobi SVD.
//!
//! Orthogonalizes column pairs by Givens rotations until the matrix columns
//! are mutually orthogonal; singular values are then the column norms and the
//! accumulated rotations give the right singular vectors. Quadratically
//! convergent and accurate down to tiny singular values, which the tail-rank
//! checks rely on.

use ndarray::{s, Array2};

use super::qr::qr_thin;

/// Result of a thin SVD restricted to what the PCA paths need: singular
/// values (descending) and right singular vectors as columns of `v` (d x r).
pub struct ThinSvd {
    pub singular_values: Vec<f64>,
    /// d x r, orthonormal columns, one per singular value.
    pub v: Array2<f64>,
}

const MAX_SWEEPS: usize = 60;
const ORTHO_TOL: f64 = 1e-15;

/// Singular values and right singular vectors of an arbitrary n x d matrix.
///
/// Returns min(n, d) pairs sorted by descending singular value. Each column
/// of `v` is sign-fixed so its largest-magnitude entry is positive.
pub fn singular_values_and_right_vectors(a: &Array2<f64>) -> ThinSvd {
    let (n, d) = a.dim();
    if n >= d {
        let (sv, v) = jacobi_tall(a);
        sort_and_fix(sv, v)
    } else {
        // A = U S V^T  <=>  A^T = V S U^T: run on the transpose and
        // orthonormalize the resulting column set to recover V.
        let at = a.t().to_owned(); // d x n, tall
        let mut w = at;
        let mut _j = Array2::<f64>::eye(n);
        jacobi_sweeps(&mut w, &mut _j);
        let sv: Vec<f64> = (0..n)
            .map(|c| w.slice(s![.., c]).dot(&w.slice(s![.., c])).sqrt())
            .collect();
        // Columns of w are U*S of A^T, i.e. V*S of A. Normalize nonzero
        // columns; QR completion handles exact-zero tails deterministically.
        let mut v = w;
        for c in 0..n {
            if sv[c] > 0.0 {
                let mut col = v.slice_mut(s![.., c]);
                col.mapv_inplace(|x| x / sv[c]);
            }
        }
        if sv.iter().any(|&s| s == 0.0) {
            let (q, _) = qr_thin(&v);
            v = q;
        }
        sort_and_fix(sv, v)
    }
}

fn jacobi_tall(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let d = a.ncols();
    let mut w = a.clone();
    let mut v = Array2::<f64>::eye(d);
    jacobi_sweeps(&mut w, &mut v);
    let sv: Vec<f64> = (0..d)
        .map(|c| w.slice(s![.., c]).dot(&w.slice(s![.., c])).sqrt())
        .collect();
    (sv, v)
}

/// Core sweep loop: orthogonalize columns of `w`, accumulating rotations
/// into the square matrix `rot` (same column count as `w`).
fn jacobi_sweeps(w: &mut Array2<f64>, rot: &mut Array2<f64>) {
    let c = w.ncols();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..c {
            for q in (p + 1)..c {
                let col_p = w.slice(s![.., p]);
                let col_q = w.slice(s![.., q]);
                let alpha = col_p.dot(&col_p);
                let beta = col_q.dot(&col_q);
                let gamma = col_p.dot(&col_q);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= ORTHO_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_columns(w, p, q, cs, sn);
                rotate_columns(rot, p, q, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }
}

#[inline]
fn rotate_columns(m: &mut Array2<f64>, p: usize, q: usize, cs: f64, sn: f64) {
    for i in 0..m.nrows() {
        let a = m[[i, p]];
        let b = m[[i, q]];
        m[[i, p]] = cs * a - sn * b;
        m[[i, q]] = sn * a + cs * b;
    }
}

fn sort_and_fix(sv: Vec<f64>, v: Array2<f64>) -> ThinSvd {
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap());
    let d = v.nrows();
    let mut singular_values = Vec::with_capacity(sv.len());
    let mut vv = Array2::<f64>::zeros((d, sv.len()));
    for (out_c, &in_c) in order.iter().enumerate() {
        singular_values.push(sv[in_c]);
        // Sign convention: largest-magnitude entry positive.
        let col = v.slice(s![.., in_c]);
        let mut best = 0usize;
        for i in 1..d {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        let flip = if col[best] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            vv[[i, out_c]] = flip * col[i];
        }
    }
    ThinSvd {
        singular_values,
        v: vv,
    }
}
