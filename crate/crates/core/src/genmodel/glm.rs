//! GLM fit and residual PCA for coefficient databases.

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, singular_values_and_right_vectors};

/// Least-squares coefficients and residuals of `database` on `design`.
///
/// Returns (B, residuals) with B = argmin |design B - database|_F solved by
/// QR, residuals = database - design B, orthogonal to the design columns.
pub fn fit_glm(
    database: &Array2<f64>,
    design: &Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let (n, p) = design.dim();
    if database.nrows() != n {
        return Err(Error::InvalidData(format!(
            "database has {} rows, design has {}",
            database.nrows(),
            n
        )));
    }
    if n < p {
        return Err(Error::RankDeficientDesign(format!(
            "{n} rows cannot determine {p} design columns"
        )));
    }
    let b = least_squares(design, database)?;
    let residuals = database - &design.dot(&b);
    Ok((b, residuals))
}

/// Thin SVD of the centered residual matrix, truncated to `n_pcs`.
///
/// Returns (components n_pcs x d with orthonormal rows, singular values
/// descending, scores n x n_pcs).
pub fn residual_pca(
    residuals: &Array2<f64>,
    n_pcs: usize,
) -> Result<(Array2<f64>, Vec<f64>, Array2<f64>)> {
    let (n, d) = residuals.dim();
    if n_pcs == 0 || n_pcs > n.min(d) {
        return Err(Error::InvalidRank(format!(
            "n_pcs = {n_pcs} outside 1..=min({n}, {d})"
        )));
    }
    let means = residuals.mean_axis(Axis(0)).expect("nonempty");
    let mut centered = residuals.clone();
    for (j, &m) in means.iter().enumerate() {
        centered.column_mut(j).mapv_inplace(|x| x - m);
    }
    let svd = singular_values_and_right_vectors(&centered);
    let mut components = Array2::<f64>::zeros((n_pcs, d));
    for k in 0..n_pcs {
        components.row_mut(k).assign(&svd.v.column(k));
    }
    let singular_values = svd.singular_values[..n_pcs].to_vec();
    let scores = centered.dot(&components.t());
    Ok((components, singular_values, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmodel::design::{build_design_matrix, FactorSpec};
    use crate::seeding;
    use ndarray::Array2;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn balanced_rows(spec: &FactorSpec, replicates: usize) -> Vec<Vec<usize>> {
        let mut rows = Vec::new();
        for cell in spec.all_cells() {
            for _ in 0..replicates {
                rows.push(cell.clone());
            }
        }
        rows
    }

    fn planted(seed: u64, noise_std: f64, replicates: usize) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let spec = FactorSpec::new(vec![("a".into(), 2), ("b".into(), 3)], true).unwrap();
        let rows = balanced_rows(&spec, replicates);
        let design = build_design_matrix(&rows, &spec).unwrap();
        let mut rng = seeding::rng(seed);
        let b0 = Array2::from_shape_fn((spec.n_columns(), 8), |_| {
            rng.sample::<f64, _>(StandardNormal)
        });
        let mut database = design.dot(&b0);
        if noise_std > 0.0 {
            for v in database.iter_mut() {
                *v += noise_std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        (design, b0, database)
    }

    #[test]
    fn noiseless_database_recovered_exactly() {
        let (design, b0, database) = planted(1, 0.0, 4);
        let (b, residuals) = fit_glm(&database, &design).unwrap();
        let max_err = (&b - &b0).iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        assert!(max_err <= 1e-10, "max |B - B0| = {max_err:.3e}");
        let max_res = residuals.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        assert!(max_res <= 1e-10);
    }

    #[test]
    fn noisy_database_recovered_within_tolerance() {
        // 2x3 cells x 67 replicates = 402 rows, close to the 400-row target
        let (design, b0, database) = planted(2, 0.01, 67);
        assert_eq!(design.nrows(), 402);
        let (b, _) = fit_glm(&database, &design).unwrap();
        let max_err = (&b - &b0).iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        assert!(max_err <= 0.05, "max |B - B0| = {max_err:.3e}");
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let (design, _, mut database) = planted(3, 0.0, 10);
        let mut rng = seeding::rng(4);
        for v in database.iter_mut() {
            *v += 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
        let (_, residuals) = fit_glm(&database, &design).unwrap();
        let gram = design.t().dot(&residuals);
        let max = gram.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        assert!(max < 1e-8 * design.nrows() as f64, "max = {max:.3e}");
    }

    #[test]
    fn duplicated_design_column_rejected() {
        let (design, _, database) = planted(5, 0.0, 4);
        let mut bad = Array2::<f64>::zeros((design.nrows(), design.ncols() + 1));
        bad.slice_mut(ndarray::s![.., ..design.ncols()])
            .assign(&design);
        let last = design.column(1).to_owned();
        bad.column_mut(design.ncols()).assign(&last);
        assert!(matches!(
            fit_glm(&database, &bad),
            Err(Error::RankDeficientDesign(_))
        ));
    }

    #[test]
    fn rank_three_residuals_have_tiny_tail() {
        let mut rng = seeding::rng(6);
        let factors = Array2::from_shape_fn((40, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let loadings = Array2::from_shape_fn((3, 10), |_| rng.sample::<f64, _>(StandardNormal));
        let residuals = factors.dot(&loadings);
        let (_, sv, _) = residual_pca(&residuals, 5).unwrap();
        assert!(sv[3] < 1e-10 * sv[0]);
        assert!(sv[4] < 1e-10 * sv[0]);
    }

    #[test]
    fn full_rank_reconstruction_recovers_matrix() {
        let mut rng = seeding::rng(7);
        let residuals = Array2::from_shape_fn((20, 6), |_| rng.sample::<f64, _>(StandardNormal));
        let (components, _, scores) = residual_pca(&residuals, 6).unwrap();
        let means = residuals.mean_axis(Axis(0)).unwrap();
        let recon = scores.dot(&components);
        for i in 0..20 {
            for j in 0..6 {
                let want = residuals[[i, j]] - means[j];
                assert!((recon[[i, j]] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn matches_exact_svd_oracle_on_random_matrix() {
        let mut rng = seeding::rng(8);
        let residuals = Array2::from_shape_fn((50, 20), |_| rng.sample::<f64, _>(StandardNormal));
        let (_, sv, _) = residual_pca(&residuals, 20).unwrap();
        let means = residuals.mean_axis(Axis(0)).unwrap();
        let mut centered = residuals.clone();
        for (j, &m) in means.iter().enumerate() {
            centered.column_mut(j).mapv_inplace(|x| x - m);
        }
        let na = nalgebra::DMatrix::from_fn(50, 20, |i, j| centered[[i, j]]);
        let oracle = na.svd(false, false);
        let mut want: Vec<f64> = oracle.singular_values.iter().copied().collect();
        want.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (got, want) in sv.iter().zip(want.iter()) {
            assert!((got - want).abs() <= 1e-8 * want.max(1.0));
        }
    }

    #[test]
    fn oversized_rank_rejected() {
        let residuals = Array2::<f64>::zeros((5, 4));
        assert!(matches!(
            residual_pca(&residuals, 5),
            Err(Error::InvalidRank(_))
        ));
    }
}
