//! Order-fixed reductions and small sample statistics.

use rayon::prelude::*;

use crate::scalar::Real;

/// Pairwise summation in a fixed tree order.
pub fn pairwise_sum<S: Real>(xs: &[S]) -> S {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().fold(S::zero(), |a, &b| a + b);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean<S: Real>(xs: &[S]) -> S {
    if xs.is_empty() {
        return S::zero();
    }
    pairwise_sum(xs) / S::from_usize_lossy(xs.len())
}

/// Mean and standard error of the mean (sample std / sqrt(n)).
pub fn mean_and_se<S: Real>(xs: &[S]) -> (S, S) {
    let n = xs.len();
    if n > 0 && xs.iter().all(|&x| x == xs[0]) {
        // a deterministic sample is reported exactly
        return (xs[0], S::zero());
    }
    let m = mean(xs);
    if n < 2 {
        return (m, S::zero());
    }
    let sq: Vec<S> = xs.iter().map(|&x| (x - m) * (x - m)).collect();
    let var = pairwise_sum(&sq) / S::from_usize_lossy(n - 1);
    (m, (var / S::from_usize_lossy(n)).sqrt())
}

/// Ratio-of-means estimate `mean(a)/mean(b)` with its delta-method standard error.
pub fn ratio_and_se<S: Real>(a: &[S], b: &[S]) -> (S, S) {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let ma = mean(a);
    let mb = mean(b);
    let r = ma / mb;
    if n < 2 {
        return (r, S::zero());
    }
    let resid: Vec<S> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let e = x - r * y;
            e * e
        })
        .collect();
    let var = pairwise_sum(&resid) / S::from_usize_lossy(n - 1);
    (r, (var / S::from_usize_lossy(n)).sqrt() / mb.abs())
}

/// Evaluates `f` for every index in `0..n` and returns the results in index
/// order. The output does not depend on the size of the worker pool.
pub fn par_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Like [`par_collect`] but gives every worker a reusable scratch value.
pub fn par_collect_with<T, W, I, F>(n: usize, init: I, f: F) -> Vec<T>
where
    T: Send,
    W: Send,
    I: Fn() -> W + Sync + Send,
    F: Fn(&mut W, usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map_init(init, f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sample_has_zero_error() {
        let xs = vec![(-1.0f64).exp(); 1000];
        let (m, se) = mean_and_se(&xs);
        assert!((m - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn ratio_of_proportional_samples_is_exact() {
        let b: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        let a: Vec<f64> = b.iter().map(|x| 3.0 * x).collect();
        let (r, se) = ratio_and_se(&a, &b);
        assert!((r - 3.0).abs() < 1e-14);
        assert!(se < 1e-14);
    }

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64 * 0.25).collect();
        assert_eq!(pairwise_sum(&xs), xs.iter().sum::<f64>());
    }
}
