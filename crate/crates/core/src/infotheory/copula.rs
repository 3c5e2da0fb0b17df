//! Gaussian copula normalization.

use ndarray::Array2;

use super::special::inverse_normal_cdf;
use crate::error::{Error, Result};

/// Samples standardized to a Gaussian copula: each column rank-transformed,
/// mapped through the empirical CDF k/(n+1), then through the inverse
/// standard-normal CDF. Dependence structure survives; marginals do not.
#[derive(Debug, Clone)]
pub struct CopulaMatrix {
    data: Array2<f64>,
}

impl CopulaMatrix {
    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_dims(&self) -> usize {
        self.data.ncols()
    }

    /// Column subset, preserving copula validity (the transform is per column).
    pub fn select_columns(&self, cols: &[usize]) -> CopulaMatrix {
        let mut out = Array2::<f64>::zeros((self.n_samples(), cols.len()));
        for (k, &c) in cols.iter().enumerate() {
            out.column_mut(k).assign(&self.data.column(c));
        }
        CopulaMatrix { data: out }
    }

    /// Column-wise concatenation of two copula matrices over the same samples.
    pub fn concat(a: &CopulaMatrix, b: &CopulaMatrix) -> Result<CopulaMatrix> {
        if a.n_samples() != b.n_samples() {
            return Err(Error::InvalidData(format!(
                "cannot concatenate copula matrices with {} and {} samples",
                a.n_samples(),
                b.n_samples()
            )));
        }
        let mut out = Array2::<f64>::zeros((a.n_samples(), a.n_dims() + b.n_dims()));
        out.slice_mut(ndarray::s![.., ..a.n_dims()]).assign(&a.data);
        out.slice_mut(ndarray::s![.., a.n_dims()..]).assign(&b.data);
        Ok(CopulaMatrix { data: out })
    }

    /// Reorder rows by `perm` (row i of the output is row perm[i] of self).
    pub fn permute_rows(&self, perm: &[usize]) -> CopulaMatrix {
        let mut out = Array2::<f64>::zeros(self.data.dim());
        for (i, &src) in perm.iter().enumerate() {
            out.row_mut(i).assign(&self.data.row(src));
        }
        CopulaMatrix { data: out }
    }
}

/// Rank-normalize every column of `samples` onto a Gaussian copula.
///
/// Ties receive average ranks, so the output is independent of input row
/// order up to the same permutation and identical for any strictly
/// increasing remapping of a column.
pub fn copula_transform(samples: &Array2<f64>) -> Result<CopulaMatrix> {
    let (n, d) = samples.dim();
    if n < 3 {
        return Err(Error::InsufficientSamples { need: 3, got: n });
    }
    if d == 0 {
        return Err(Error::InvalidData("no columns to transform".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidData(
            "non-finite entry in copula input".into(),
        ));
    }

    let mut data = Array2::<f64>::zeros((n, d));
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for j in 0..d {
        let col = samples.column(j);
        order.clear();
        order.extend(0..n);
        order.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).expect("finite"));

        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && col[order[end]] == col[order[start]] {
                end += 1;
            }
            // average of 1-based ranks start+1 ..= end
            let rank = (start + 1 + end) as f64 / 2.0;
            let z = inverse_normal_cdf(rank / (n as f64 + 1.0));
            for &i in &order[start..end] {
                data[[i, j]] = z;
            }
            start = end;
        }
    }
    Ok(CopulaMatrix { data })
}
