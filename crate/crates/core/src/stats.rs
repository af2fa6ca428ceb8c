//! Monte Carlo estimates and thread-count-independent reductions.

use rayon::prelude::*;

use crate::scalar::Real;

/// Fixed reduction block; partial sums never depend on the rayon pool size.
pub const BLOCK: usize = 4096;

/// Two-sided 95% normal quantile used for every reported half-width.
pub const Z95: f64 = 1.96;

/// Sum in fixed blocks, blocks combined left to right.
pub fn block_sum<T: Real>(xs: &[T]) -> T {
    let partial: Vec<T> = xs
        .par_chunks(BLOCK)
        .map(|c| c.iter().fold(T::zero(), |a, &x| a + x))
        .collect();
    partial.into_iter().fold(T::zero(), |a, x| a + x)
}

pub fn mean<T: Real>(xs: &[T]) -> T {
    block_sum(xs) / T::lit(xs.len() as f64)
}

/// Block sum of `f(i)` for `i in 0..n`.
pub fn block_sum_by<T: Real>(n: usize, f: impl Fn(usize) -> T + Sync) -> T {
    let n_blocks = n.div_ceil(BLOCK);
    let partial: Vec<T> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let hi = ((b + 1) * BLOCK).min(n);
            (b * BLOCK..hi).fold(T::zero(), |a, i| a + f(i))
        })
        .collect();
    partial.into_iter().fold(T::zero(), |a, x| a + x)
}

/// Sample covariance (n - 1 denominator) of two equally long samples.
pub fn covariance<T: Real>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return T::zero();
    }
    let ma = mean(a);
    let mb = mean(b);
    block_sum_by(n, |i| (a[i] - ma) * (b[i] - mb)) / T::lit((n - 1) as f64)
}

pub fn variance<T: Real>(a: &[T]) -> T {
    covariance(a, a)
}

/// A Monte Carlo estimate with its standard error and 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundEstimate<T> {
    pub value: T,
    pub stderr: T,
    pub ci_half: T,
    pub n_used: usize,
}

impl<T: Real> BoundEstimate<T> {
    pub fn new(value: T, stderr: T, n_used: usize) -> Self {
        let stderr = if stderr > T::zero() { stderr } else { T::zero() };
        Self {
            value,
            stderr,
            ci_half: T::lit(Z95) * stderr,
            n_used,
        }
    }

    /// A deterministic quantity with no sampling error.
    pub fn exact(value: T) -> Self {
        Self::new(value, T::zero(), 0)
    }

    /// Same stderr, value replaced. Used where the value is fixed by an identity.
    pub fn with_value(self, value: T) -> Self {
        Self { value, ..self }
    }

    /// Whether `|self - other| <= k * (ci_self + ci_other)`.
    pub fn agrees_with(&self, other: &Self, k: T) -> bool {
        (self.value - other.value).abs() <= k * (self.ci_half + other.ci_half)
    }
}

/// Sample mean with stderr `sd / sqrt(n)`.
pub fn mean_estimate<T: Real>(xs: &[T]) -> BoundEstimate<T> {
    let n = xs.len();
    let m = mean(xs);
    let se = (variance(xs) / T::lit(n as f64)).sqrt();
    BoundEstimate::new(m, se, n)
}

/// `mean(first) + sign * sqrt(mean(penalty))`, stderr by the first-order delta method on
/// the joint sample covariance of the two per-path terms.
pub fn penalised_estimate<T: Real>(first: &[T], penalty: &[T], sign: T) -> BoundEstimate<T> {
    assert_eq!(first.len(), penalty.len());
    let n = first.len();
    let nf = T::lit(n as f64);
    let m1 = mean(first);
    let m2 = mean(penalty);
    let root = m2.sqrt();
    let value = m1 + sign * root;
    let v11 = variance(first);
    let var = if root > T::zero() {
        let g = sign / (T::lit(2.0) * root);
        let v22 = variance(penalty);
        let v12 = covariance(first, penalty);
        v11 + g * g * v22 + T::lit(2.0) * g * v12
    } else {
        v11
    };
    BoundEstimate::new(value, (var / nf).max(T::zero()).sqrt(), n)
}

/// `sqrt(mean(xs))` with delta-method stderr.
pub fn sqrt_of_mean_estimate<T: Real>(xs: &[T]) -> BoundEstimate<T> {
    let n = xs.len();
    let m = mean(xs);
    let root = m.sqrt();
    let se = if root > T::zero() {
        (variance(xs) / T::lit(n as f64)).sqrt() / (T::lit(2.0) * root)
    } else {
        T::zero()
    };
    BoundEstimate::new(root, se, n)
}
