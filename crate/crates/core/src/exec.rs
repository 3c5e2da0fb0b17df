//! Execution policy for data-parallel inner loops.
//!
//! Hot loops (per-feature MI, permutation nulls, pairwise dissimilarities,
//! batch forward passes) map an index range through a pure closure and collect
//! results in index order, so the output is identical regardless of schedule.
//! With the default `parallel` feature the mapping runs on rayon; without it
//! everything falls back to plain sequential iteration. `map_indexed_seq` is
//! always available so benches and schedule-independence tests can compare
//! both paths in one build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `0..n` through `f`, collecting results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential reference version of [`map_indexed`].
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let f = |i: usize| (i as f64).sqrt() * 3.0 - (i as f64);
        assert_eq!(map_indexed(1000, f), map_indexed_seq(1000, f));
    }
}
