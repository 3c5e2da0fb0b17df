//! Property tests for invariants that must hold on arbitrary well-formed
//! inputs, not just hand-picked fixtures.

use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use infolens_core::infotheory::{
    co_information, copula_transform, gaussian_mi, permutation_null,
};
use infolens_core::io::{matrix_from_bytes, matrix_to_bytes};
use infolens_core::linalg::{randomized_pca, rdm};
use infolens_core::seeding;

fn normal_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = seeding::rng(seed);
    Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng))
}

/// Correlated triple: L and R are noisy copies of a shared source S plus an
/// independent common confound, exercising positive and negative regions of
/// the co-information.
fn gaussian_triple(seed: u64, n: usize) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let mut rng = seeding::rng(seed);
    let a: f64 = rng.gen_range(-1.5..1.5);
    let b: f64 = rng.gen_range(-1.5..1.5);
    let c: f64 = rng.gen_range(0.0..1.5);
    let mut s = Array2::zeros((n, 1));
    let mut l = Array2::zeros((n, 1));
    let mut r = Array2::zeros((n, 1));
    for i in 0..n {
        let source: f64 = StandardNormal.sample(&mut rng);
        let confound: f64 = StandardNormal.sample(&mut rng);
        let e1: f64 = StandardNormal.sample(&mut rng);
        let e2: f64 = StandardNormal.sample(&mut rng);
        s[[i, 0]] = source;
        l[[i, 0]] = a * source + c * confound + e1;
        r[[i, 0]] = b * source + c * confound + e2;
    }
    (s, l, r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Uncorrected MI is a difference of Gaussian entropies that cannot go
    /// negative, and is symmetric in its arguments.
    #[test]
    fn mi_nonnegative_and_symmetric(seed in 0u64..10_000) {
        let x = copula_transform(&normal_matrix(200, 2, seed)).unwrap();
        let y = copula_transform(&normal_matrix(200, 1, seed.wrapping_add(1))).unwrap();
        let xy = gaussian_mi(&x, &y, false).unwrap().bits;
        let yx = gaussian_mi(&y, &x, false).unwrap().bits;
        prop_assert!(xy >= -1e-12, "MI = {xy}");
        prop_assert!((xy - yx).abs() < 1e-9, "asymmetry: {xy} vs {yx}");
    }

    /// MI depends only on ranks: strictly monotone column transforms leave
    /// the estimate bit-identical.
    #[test]
    fn mi_invariant_under_monotone_transforms(seed in 0u64..10_000) {
        let raw_x = normal_matrix(150, 1, seed);
        let raw_y = normal_matrix(150, 1, seed.wrapping_add(7))
            + &raw_x * 0.5;
        let base = gaussian_mi(
            &copula_transform(&raw_x).unwrap(),
            &copula_transform(&raw_y).unwrap(),
            false,
        )
        .unwrap()
        .bits;
        let warped = gaussian_mi(
            &copula_transform(&raw_x.mapv(|v| v.exp())).unwrap(),
            &copula_transform(&raw_y.mapv(|v| v.powi(3) + 2.0 * v)).unwrap(),
            false,
        )
        .unwrap()
        .bits;
        prop_assert_eq!(base.to_bits(), warped.to_bits());
    }

    /// Redundancy can never exceed either marginal information, and the
    /// joint can never carry less than the larger marginal (uncorrected).
    #[test]
    fn coinformation_bounds(seed in 0u64..10_000) {
        let (s, l, r) = gaussian_triple(seed, 400);
        let cs = copula_transform(&s).unwrap();
        let cl = copula_transform(&l).unwrap();
        let cr = copula_transform(&r).unwrap();
        let red = co_information(&cs, &cl, &cr, false).unwrap();
        let [mi_sl, mi_sr, mi_slr] = red.component_mi;
        prop_assert!(red.bits <= mi_sl.min(mi_sr) + 1e-6,
            "red {} > min({mi_sl}, {mi_sr})", red.bits);
        prop_assert!(mi_slr >= mi_sl.max(mi_sr) - 1e-6,
            "joint {mi_slr} < max({mi_sl}, {mi_sr})");
        prop_assert!((red.bits - (mi_sl + mi_sr - mi_slr)).abs() < 1e-12);
    }

    /// The permutation null is sorted, sized, and its threshold is a member
    /// of the distribution.
    #[test]
    fn permutation_null_shape(seed in 0u64..1_000) {
        let s = normal_matrix(80, 6, seed);
        let response = normal_matrix(80, 1, seed.wrapping_add(3));
        let null = permutation_null(&s, &response, 1, false, 100, seed).unwrap();
        prop_assert_eq!(null.null_max_distribution.len(), 100);
        prop_assert!(null
            .null_max_distribution
            .windows(2)
            .all(|w| w[0] <= w[1]));
        prop_assert!(null
            .null_max_distribution
            .iter()
            .any(|&v| v == null.percentile_95));
        let kept = null
            .null_max_distribution
            .iter()
            .filter(|&&v| v <= null.percentile_95)
            .count();
        prop_assert!(kept >= 95);
    }

    /// Matrix files survive a write/read cycle bit for bit, whatever the
    /// finite payload.
    #[test]
    fn imat_round_trip(
        rows in 0usize..12,
        cols in 0usize..12,
        seed in 0u64..10_000,
        scale in prop::sample::select(vec![1e-300, 1e-10, 1.0, 1e10, 1e300]),
    ) {
        let mut rng = seeding::rng(seed);
        let matrix = Array2::from_shape_fn((rows, cols), |_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v * scale
        });
        let bytes = matrix_to_bytes(&matrix).unwrap();
        let back = matrix_from_bytes(std::path::Path::new("mem"), &bytes).unwrap();
        prop_assert_eq!(back.dim(), matrix.dim());
        for (a, b) in back.iter().zip(matrix.iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    /// Randomized PCA returns orthonormal components and non-increasing,
    /// non-negative explained variance.
    #[test]
    fn rpca_components_orthonormal(seed in 0u64..10_000, k in 1usize..5) {
        let data = normal_matrix(30, 8, seed);
        let model = randomized_pca(&data, k, 3, 2, seed).unwrap();
        let gram = model.components.dot(&model.components.t());
        for i in 0..k {
            for j in 0..k {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((gram[[i, j]] - want).abs() < 1e-9,
                    "gram[{i},{j}] = {}", gram[[i, j]]);
            }
        }
        prop_assert!(model.explained_variance.iter().all(|&v| v >= -1e-12));
        prop_assert!(model
            .explained_variance
            .windows(2)
            .all(|w| w[0] >= w[1] - 1e-12));
    }

    /// Correlation-distance RDMs are symmetric with a zero diagonal and
    /// entries in [0, 2].
    #[test]
    fn rdm_is_a_distance_table(seed in 0u64..10_000) {
        let scores = normal_matrix(10, 5, seed);
        let labels: Vec<String> = (0..10).map(|i| format!("b{}", i % 2)).collect();
        let table = rdm(&scores, &labels).unwrap();
        let m = &table.matrix;
        for i in 0..10 {
            prop_assert!(m[[i, i]].abs() < 1e-12);
            for j in 0..10 {
                prop_assert!((m[[i, j]] - m[[j, i]]).abs() < 1e-12);
                prop_assert!((-1e-12..=2.0 + 1e-12).contains(&m[[i, j]]));
            }
        }
    }
}

/// One deterministic non-proptest check: the copula transform is invariant
/// to affine rescaling, which backs the per-viewpoint restriction rule (the
/// transform is recomputed on each analyzed subset).
#[test]
fn copula_of_subset_differs_from_subset_of_copula() {
    let data = normal_matrix(60, 1, 5);
    let full = copula_transform(&data).unwrap();
    let half_rows: Vec<usize> = (0..30).collect();
    let sliced_after = full.permute_rows(&half_rows);
    let transformed_after = copula_transform(
        &data.select(ndarray::Axis(0), &half_rows),
    )
    .unwrap();
    let differs = sliced_after
        .data()
        .iter()
        .zip(transformed_after.data().iter())
        .any(|(a, b)| (a - b).abs() > 1e-9);
    assert!(differs, "restricting rows must change the rank normalization");
}
