//! Nested Monte Carlo benchmark for `E(R | F_t0)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::LsvParams;
use crate::rng::{NormalStream, DOMAIN_INNER};
use crate::scalar::Real;
use crate::simulate::{simulate_paths, PathBatch, Stepper};
use crate::table::{point_column, PriceColumn};

/// Cross-section of outer paths at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterStates<T> {
    pub s: Vec<T>,
    pub v: Vec<T>,
}

impl<T> OuterStates<T> {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// The first `n` outer states.
    pub fn truncate(mut self, n: usize) -> Self {
        self.s.truncate(n);
        self.v.truncate(n);
        self
    }
}

/// Exposes the `t0` states of a batch so bounds and oracle share outer randomness.
pub fn reuse_outer_paths<T: Real>(batch: &PathBatch<T>) -> OuterStates<T> {
    let w = batch.restrict_to_window();
    let (s, v) = (0..w.n_paths()).map(|i| w.state(i, 0)).unzip();
    OuterStates { s, v }
}

/// Inner-sample mean of `R(t0, T)` started from `(s, v)` at `t0`.
///
/// Sub-path pairs are antithetic; substream ids combine the outer index (high 32 bits)
/// and the inner pair index (low 32 bits).
pub fn inner_mean_realised_var<T: Real>(
    p: &LsvParams<T>,
    s: T,
    v: T,
    n_inner: usize,
    seed: u64,
    outer_idx: usize,
) -> T {
    let stepper = Stepper::new(p);
    let n = p.window_steps();
    let mut total = T::zero();
    let pairs = n_inner / 2;
    let run = |stream: u64, paired: bool| {
        let mut rng = NormalStream::new(seed, DOMAIN_INNER, stream);
        let mut st = [s, s];
        let mut vt = [v, v];
        let mut acc = [T::zero(); 2];
        let m = if paired { 2 } else { 1 };
        for _ in 0..n {
            let z1 = T::lit(rng.normal());
            let z2 = T::lit(rng.normal());
            for j in 0..m {
                let (a, b) = if j == 0 { (z1, z2) } else { (-z1, -z2) };
                let (sig2, _, _) = stepper.step(&mut st[j], &mut vt[j], a, b);
                acc[j] = acc[j] + sig2;
            }
        }
        acc[0] + if paired { acc[1] } else { T::zero() }
    };
    let base = (outer_idx as u64) << 32;
    for k in 0..pairs {
        total = total + run(base | k as u64, true);
    }
    if n_inner % 2 == 1 {
        total = total + run(base | pairs as u64, false);
    }
    stepper.rv_scale() * total / T::lit(n_inner as f64)
}

/// Nested estimate of `E(R | F_t0)` for every outer state.
pub fn nested_conditional_var<T: Real>(
    p: &LsvParams<T>,
    outer: &OuterStates<T>,
    n_inner: usize,
    seed: u64,
) -> Result<Vec<T>> {
    p.validate()?;
    if n_inner < 2 {
        return Err(Error::InvalidInput("nested oracle needs at least 2 inner paths".into()));
    }
    Ok((0..outer.len())
        .into_par_iter()
        .map(|i| inner_mean_realised_var(p, outer.s[i], outer.v[i], n_inner, seed, i))
        .collect())
}

/// Prices every instrument from nested estimates on the given outer states.
pub fn nested_price_from<T: Real>(
    p: &LsvParams<T>,
    outer: &OuterStates<T>,
    n_inner: usize,
    seed: u64,
    strikes: &[T],
) -> Result<PriceColumn<T>> {
    if outer.len() < 2 {
        return Err(Error::InvalidInput("nested oracle needs at least 2 outer paths".into()));
    }
    let x = nested_conditional_var(p, outer, n_inner, seed)?;
    Ok(point_column(&x, strikes))
}

/// Self-contained nested benchmark: simulates the outer paths, then the inner ones.
pub fn nested_price<T: Real>(
    p: &LsvParams<T>,
    n_outer: usize,
    n_inner: usize,
    seed: u64,
    strikes: &[T],
) -> Result<PriceColumn<T>> {
    if n_outer < 2 {
        return Err(Error::InvalidInput("nested oracle needs at least 2 outer paths".into()));
    }
    let batch = simulate_paths(p, n_outer, seed, n_outer % 2 == 0)?;
    nested_price_from(p, &reuse_outer_paths(&batch), n_inner, seed, strikes)
}
