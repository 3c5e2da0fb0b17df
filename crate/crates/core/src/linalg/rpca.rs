//! Randomized PCA via the Gaussian range finder.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::qr::qr_thin;
use super::svd::singular_values_and_right_vectors;
use crate::error::{Error, Result};
use crate::seeding;

/// Principal components of a data matrix, recovered through a randomized
/// sketch of its range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaModel {
    /// k x d, one orthonormal component per row.
    pub components: Array2<f64>,
    /// Variance of the data along each component, descending.
    pub explained_variance: Vec<f64>,
    /// n x k projections of the centered data onto the components.
    pub scores: Array2<f64>,
    /// Column means removed before sketching.
    pub column_means: Vec<f64>,
    pub oversampling: usize,
    pub power_iterations: usize,
    pub seed: u64,
}

impl PcaModel {
    /// Project new rows (same feature space) onto the fitted components.
    pub fn transform(&self, data: &Array2<f64>) -> Array2<f64> {
        let mut centered = data.clone();
        for (j, &m) in self.column_means.iter().enumerate() {
            centered.column_mut(j).mapv_inplace(|x| x - m);
        }
        centered.dot(&self.components.t())
    }
}

/// Approximate the top-k principal components of `data` (rows = samples).
///
/// Columns are centered first. A seeded Gaussian sketch captures the range of
/// the centered matrix, power iterations with re-orthonormalization sharpen it
/// against slowly decaying spectra, and a small exact SVD of the projected
/// matrix yields the components. Passing `oversampling` so that
/// k + oversampling = min(n, d) makes the range capture exact.
pub fn randomized_pca(
    data: &Array2<f64>,
    k: usize,
    oversampling: usize,
    power_iterations: usize,
    seed: u64,
) -> Result<PcaModel> {
    let (n, d) = data.dim();
    if n < 2 {
        return Err(Error::InsufficientSamples { need: 2, got: n });
    }
    if k == 0 {
        return Err(Error::InvalidRank("k must be at least 1".into()));
    }
    let sketch = k + oversampling;
    if sketch > n.min(d) {
        return Err(Error::InvalidRank(format!(
            "k + oversampling = {} exceeds min(n, d) = {}",
            sketch,
            n.min(d)
        )));
    }

    let means = data.mean_axis(Axis(0)).expect("n >= 2");
    let mut centered = data.clone();
    for (j, &m) in means.iter().enumerate() {
        centered.column_mut(j).mapv_inplace(|x| x - m);
    }

    let mut rng = seeding::rng(seeding::split(seed, "rpca.sketch"));
    let omega = Array2::from_shape_fn((d, sketch), |_| rng.sample::<f64, _>(StandardNormal));

    let (mut q, _) = qr_thin(&centered.dot(&omega));
    for _ in 0..power_iterations {
        let (z, _) = qr_thin(&centered.t().dot(&q));
        let (q2, _) = qr_thin(&centered.dot(&z));
        q = q2;
    }

    let b = q.t().dot(&centered);
    let small = singular_values_and_right_vectors(&b);

    let mut components = Array2::<f64>::zeros((k, d));
    let mut explained_variance = Vec::with_capacity(k);
    for i in 0..k {
        components.row_mut(i).assign(&small.v.column(i));
        let s = small.singular_values[i];
        explained_variance.push(s * s / (n as f64 - 1.0));
    }
    let scores = centered.dot(&components.t());

    Ok(PcaModel {
        components,
        explained_variance,
        scores,
        column_means: means.to_vec(),
        oversampling,
        power_iterations,
        seed,
    })
}

/// Exact PCA by a full SVD of the centered matrix. Oracle-grade but cubic;
/// used by tests and by callers with small inputs.
pub fn exact_pca(data: &Array2<f64>, k: usize) -> Result<PcaModel> {
    let (n, d) = data.dim();
    if n < 2 {
        return Err(Error::InsufficientSamples { need: 2, got: n });
    }
    if k == 0 || k > n.min(d) {
        return Err(Error::InvalidRank(format!(
            "k = {k} outside 1..=min(n, d) = {}",
            n.min(d)
        )));
    }
    let means = data.mean_axis(Axis(0)).expect("n >= 2");
    let mut centered = data.clone();
    for (j, &m) in means.iter().enumerate() {
        centered.column_mut(j).mapv_inplace(|x| x - m);
    }
    let svd = singular_values_and_right_vectors(&centered);
    let mut components = Array2::<f64>::zeros((k, d));
    let mut explained_variance = Vec::with_capacity(k);
    for i in 0..k {
        components.row_mut(i).assign(&svd.v.column(i));
        let s = svd.singular_values[i];
        explained_variance.push(s * s / (n as f64 - 1.0));
    }
    let scores = centered.dot(&components.t());
    Ok(PcaModel {
        components,
        explained_variance,
        scores,
        column_means: means.to_vec(),
        oversampling: 0,
        power_iterations: 0,
        seed: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    fn random_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = seeding::rng(seed);
        Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn rank_one_matrix_concentrates_variance() {
        let u = Array1::from_shape_fn(40, |i| (i as f64 * 0.37).sin() + 1.2);
        let v = Array1::from_shape_fn(12, |j| (j as f64 * 0.91).cos() - 0.3);
        let a = Array2::from_shape_fn((40, 12), |(i, j)| u[i] * v[j]);
        let pca = randomized_pca(&a, 3, 7, 2, 5).unwrap();
        let total: f64 = pca.explained_variance.iter().sum();
        assert!(pca.explained_variance[0] / total >= 0.9999);
        assert!(pca.explained_variance[1] < 1e-8 * pca.explained_variance[0]);
        assert!(pca.explained_variance[2] < 1e-8 * pca.explained_variance[0]);
    }

    #[test]
    fn components_orthonormal() {
        let a = random_matrix(60, 20, 11);
        let pca = randomized_pca(&a, 5, 10, 2, 3).unwrap();
        let g = pca.components.dot(&pca.components.t());
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[[i, j]] - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn explained_variance_descending() {
        let a = random_matrix(80, 15, 21);
        let pca = randomized_pca(&a, 6, 9, 2, 9).unwrap();
        for w in pca.explained_variance.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn saturated_sketch_matches_exact_svd_oracle() {
        let a = random_matrix(200, 50, 33);
        let pca = randomized_pca(&a, 6, 44, 2, 17).unwrap();
        let exact = exact_pca(&a, 6).unwrap();
        for i in 0..6 {
            let rel = (pca.explained_variance[i] - exact.explained_variance[i]).abs()
                / exact.explained_variance[i];
            assert!(rel < 1e-6, "pc {i} rel err {rel:.3e}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = random_matrix(50, 10, 2);
        let p1 = randomized_pca(&a, 4, 6, 2, 77).unwrap();
        let p2 = randomized_pca(&a, 4, 6, 2, 77).unwrap();
        assert_eq!(p1.scores, p2.scores);
        assert_eq!(p1.components, p2.components);
    }

    #[test]
    fn invalid_rank_rejected() {
        let a = random_matrix(20, 8, 4);
        assert!(matches!(
            randomized_pca(&a, 8, 10, 2, 1),
            Err(Error::InvalidRank(_))
        ));
        assert!(matches!(
            randomized_pca(&a, 0, 2, 2, 1),
            Err(Error::InvalidRank(_))
        ));
    }

    #[test]
    fn scores_are_centered_projections() {
        let a = random_matrix(30, 6, 8);
        let pca = randomized_pca(&a, 2, 4, 2, 5).unwrap();
        let again = pca.transform(&a);
        for (x, y) in pca.scores.iter().zip(again.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
