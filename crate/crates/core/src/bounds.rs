//! Pathwise upper and lower bound estimators for VIX futures and caps.
//!
//! Upper bounds substitute an `F_t0`-measurable guess `x_hat` of the conditional
//! expected realised variance into the Legendre representation of `sqrt` (or of the
//! capped root). Lower bounds subtract a martingale increment `m_hat` from the realised
//! variance and pay a penalty for paths where it overshoots.

use crate::error::{Error, Result};
use crate::scalar::{pos, Real};
use crate::stats::{mean, mean_estimate, penalised_estimate, sqrt_of_mean_estimate, BoundEstimate};

/// `x y + 1 / (4 y)`, which dominates `sqrt(x)` with equality at `y = 1 / (2 sqrt(x))`.
pub fn legendre_sqrt<T: Real>(x: T, y: T) -> Result<T> {
    if !(y > T::zero()) {
        return Err(Error::InvalidInput(format!("legendre_sqrt needs y > 0, got {y}")));
    }
    Ok(x * y + T::one() / (T::lit(4.0) * y))
}

/// Legendre representation of `min(sqrt(x), k)` evaluated at dual point `y`.
pub fn legendre_cap<T: Real>(x: T, y: T, k: T) -> T {
    if T::lit(2.0) * y * k >= T::one() {
        x * y + T::one() / (T::lit(4.0) * y)
    } else {
        x * y + (k - k * k * y)
    }
}

fn check_lengths<T>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidInput(format!(
            "sample arrays must be non-empty and equally long ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Per-path upper-bound payoffs `r / (2 sqrt(x)) + sqrt(x) / 2`.
pub fn upper_future_terms<T: Real>(r: &[T], x_hat: &[T]) -> Result<Vec<T>> {
    check_lengths(r, x_hat)?;
    let half = T::lit(0.5);
    r.iter()
        .zip(x_hat)
        .map(|(&r, &x)| {
            if !(x > T::zero()) {
                return Err(Error::InvalidInput(format!("x_hat must be positive, got {x}")));
            }
            let rx = x.sqrt();
            Ok(half * r / rx + half * rx)
        })
        .collect()
}

/// Per-path capped upper-bound payoffs; `k` replaces the payoff where `x > k^2`.
pub fn upper_cap_terms<T: Real>(r: &[T], x_hat: &[T], k: T) -> Result<Vec<T>> {
    let mut terms = upper_future_terms(r, x_hat)?;
    let k2 = k * k;
    for (t, &x) in terms.iter_mut().zip(x_hat) {
        if x > k2 {
            *t = k;
        }
    }
    Ok(terms)
}

/// `(sqrt((r - m)+), (sqrt(max(r, m)) - sqrt(r))^2)` per path.
pub fn lower_terms<T: Real>(r: &[T], m_hat: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    check_lengths(r, m_hat)?;
    Ok(r.iter()
        .zip(m_hat)
        .map(|(&r, &m)| {
            let main = pos(r - m).sqrt();
            let gap = r.max(m).sqrt() - r.sqrt();
            (main, gap * gap)
        })
        .unzip())
}

pub fn upper_future<T: Real>(r: &[T], x_hat: &[T]) -> Result<BoundEstimate<T>> {
    Ok(mean_estimate(&upper_future_terms(r, x_hat)?))
}

pub fn lower_future<T: Real>(r: &[T], m_hat: &[T]) -> Result<BoundEstimate<T>> {
    let (main, penalty) = lower_terms(r, m_hat)?;
    Ok(penalised_estimate(&main, &penalty, -T::one()))
}

pub fn upper_cap<T: Real>(r: &[T], x_hat: &[T], k: T) -> Result<BoundEstimate<T>> {
    Ok(mean_estimate(&upper_cap_terms(r, x_hat, k)?))
}

pub fn lower_cap<T: Real>(r: &[T], m_hat: &[T], k: T) -> Result<BoundEstimate<T>> {
    let (main, penalty) = lower_terms(r, m_hat)?;
    let capped: Vec<T> = main.iter().map(|&a| a.min(k)).collect();
    Ok(penalised_estimate(&capped, &penalty, -T::one()))
}

/// Volatility swap `E sqrt(R)` and root variance swap `sqrt(E R)`.
pub fn jensen_bounds<T: Real>(r: &[T]) -> (BoundEstimate<T>, BoundEstimate<T>) {
    let roots: Vec<T> = r.iter().map(|&x| pos(x).sqrt()).collect();
    (mean_estimate(&roots), sqrt_of_mean_estimate(r))
}

/// A concave function together with its concave conjugate `f*(y) = inf_x (x y - f(x))`.
pub trait ConcaveFn<T: Real> {
    fn value(&self, x: T) -> T;
    fn conjugate(&self, y: T) -> T;
}

/// `sqrt(x)` on `[0, inf)`; conjugate `-1 / (4 y)` for `y > 0`.
pub struct SqrtFn;

impl<T: Real> ConcaveFn<T> for SqrtFn {
    fn value(&self, x: T) -> T {
        x.sqrt()
    }

    fn conjugate(&self, y: T) -> T {
        -T::one() / (T::lit(4.0) * y)
    }
}

/// `min(sqrt(x), k)`.
pub struct CappedSqrtFn<T>(pub T);

impl<T: Real> ConcaveFn<T> for CappedSqrtFn<T> {
    fn value(&self, x: T) -> T {
        x.sqrt().min(self.0)
    }

    fn conjugate(&self, y: T) -> T {
        let k = self.0;
        if T::lit(2.0) * y * k >= T::one() {
            -T::one() / (T::lit(4.0) * y)
        } else {
            k * k * y - k
        }
    }
}

/// A concave function whose conjugate is taken numerically over a fixed `x` grid.
pub struct GridConjugate<F, T> {
    pub f: F,
    pub x_grid: Vec<T>,
}

impl<T: Real, F: Fn(T) -> T> ConcaveFn<T> for GridConjugate<F, T> {
    fn value(&self, x: T) -> T {
        (self.f)(x)
    }

    fn conjugate(&self, y: T) -> T {
        self.x_grid
            .iter()
            .map(|&x| x * y - (self.f)(x))
            .fold(T::infinity(), T::min)
    }
}

#[derive(Debug, Clone)]
pub struct GapReport<T> {
    /// `f(E H)` for equiprobable outcomes under a trivial `F_t0`.
    pub reference: T,
    /// `E(y H) - f*(y) - reference` for each candidate `y`.
    pub gaps: Vec<T>,
    pub min_gap: T,
    pub argmin_y: T,
    /// Whether every gap is non-negative up to `1e-12` relative.
    pub all_dominate: bool,
}

/// Checks the dual representation `f(E H) = inf_y E(y H - f*(y))` on equiprobable
/// samples of `H` with a trivial conditioning sigma-field.
pub fn duality_gap_check<T: Real, F: ConcaveFn<T>>(
    f: &F,
    h_samples: &[T],
    y_values: &[T],
) -> Result<GapReport<T>> {
    if h_samples.is_empty() || y_values.is_empty() {
        return Err(Error::InvalidInput("duality check needs samples and candidates".into()));
    }
    check_concave(f, h_samples)?;
    let h_mean = mean(h_samples);
    let reference = f.value(h_mean);
    let tol = T::lit(1e-12) * (T::one() + reference.abs());
    let gaps: Vec<T> = y_values
        .iter()
        .map(|&y| y * h_mean - f.conjugate(y) - reference)
        .collect();
    let (idx, min_gap) = gaps
        .iter()
        .copied()
        .enumerate()
        .fold((0, T::infinity()), |(bi, bg), (i, g)| if g < bg { (i, g) } else { (bi, bg) });
    Ok(GapReport {
        reference,
        all_dominate: gaps.iter().all(|&g| g >= -tol),
        min_gap,
        argmin_y: y_values[idx],
        gaps,
    })
}

/// Midpoint concavity test on a uniform grid spanning the samples.
fn check_concave<T: Real, F: ConcaveFn<T>>(f: &F, h: &[T]) -> Result<()> {
    let lo = h.iter().copied().fold(T::infinity(), T::min);
    let hi = h.iter().copied().fold(T::neg_infinity(), T::max);
    if hi <= lo {
        return Ok(());
    }
    const POINTS: usize = 64;
    let step = (hi - lo) / T::lit(POINTS as f64);
    let xs: Vec<T> = (0..=POINTS).map(|i| lo + step * T::lit(i as f64)).collect();
    let scale = xs.iter().map(|&x| f.value(x).abs()).fold(T::one(), T::max);
    let tol = T::lit(1e-12) * scale;
    for i in 0..=POINTS {
        for j in (i + 2..=POINTS).step_by(2) {
            let mid = xs[(i + j) / 2];
            let chord = T::lit(0.5) * (f.value(xs[i]) + f.value(xs[j]));
            if f.value(mid) + tol < chord {
                return Err(Error::InvalidInput(format!(
                    "function is not concave between {} and {}",
                    xs[i], xs[j]
                )));
            }
        }
    }
    Ok(())
}
