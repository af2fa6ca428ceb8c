//! Futures, caps, calls, puts and swaps assembled from the bound estimators.

use std::fmt::Write as _;

use crate::bounds::{jensen_bounds, lower_terms, upper_cap_terms, upper_future_terms};
use crate::error::{Error, Result};
use crate::scalar::{pos, Real};
use crate::stats::{mean_estimate, penalised_estimate, BoundEstimate};

/// Prices derived from a single pointwise estimate of `sqrt(E(R | F_t0))` per path.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceColumn<T> {
    pub future: BoundEstimate<T>,
    pub strikes: Vec<T>,
    pub cap: Vec<BoundEstimate<T>>,
    pub call: Vec<BoundEstimate<T>>,
    pub put: Vec<BoundEstimate<T>>,
}

/// Averages `sqrt(x)`, `min(sqrt(x), K)` and the implied call and put over paths.
pub fn point_column<T: Real>(x: &[T], strikes: &[T]) -> PriceColumn<T> {
    let roots: Vec<T> = x.iter().map(|&v| pos(v).sqrt()).collect();
    let future = mean_estimate(&roots);
    let mut cap = Vec::new();
    let mut call = Vec::new();
    let mut put = Vec::new();
    for &k in strikes {
        let c = mean_estimate(&roots.iter().map(|&q| q.min(k)).collect::<Vec<_>>());
        let spread = mean_estimate(&roots.iter().map(|&q| pos(q - k)).collect::<Vec<_>>());
        call.push(spread.with_value(future.value - c.value));
        put.push(c.with_value(k - c.value));
        cap.push(c);
    }
    PriceColumn {
        future,
        strikes: strikes.to_vec(),
        cap,
        call,
        put,
    }
}

/// Classic regression estimate: average `sqrt(x_hat)` and its capped versions.
pub fn plain_lsmc_estimates<T: Real>(x_hat: &[T], strikes: &[T]) -> PriceColumn<T> {
    point_column(x_hat, strikes)
}

/// One instrument's four estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad<T> {
    pub lower: BoundEstimate<T>,
    pub upper: BoundEstimate<T>,
    pub plain: BoundEstimate<T>,
    pub oracle: Option<BoundEstimate<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrikeRow<T> {
    pub strike: T,
    pub cap: Quad<T>,
    pub call: Quad<T>,
    pub put: Quad<T>,
    pub swap: Quad<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeTable<T> {
    pub future: Quad<T>,
    pub vol_swap: BoundEstimate<T>,
    pub sqrt_var_swap: BoundEstimate<T>,
    pub rows: Vec<StrikeRow<T>>,
}

/// Evaluation-batch samples feeding the bound estimators.
#[derive(Debug, Clone, Copy)]
pub struct EvalSamples<'a, T> {
    pub r: &'a [T],
    pub x_hat: &'a [T],
    pub m_hat: &'a [T],
}

/// Builds the full table from evaluation samples and optional nested-oracle prices.
///
/// Call and put bounds are fixed by the identities `call_up = fut_up - cap_lo`,
/// `call_lo = fut_lo - cap_up`, `put_up = K - cap_lo`, `put_lo = K - cap_up`. Their
/// standard errors come from per-path differences on the shared batch.
pub fn assemble<T: Real>(
    samples: EvalSamples<'_, T>,
    strikes: &[T],
    oracle: Option<&PriceColumn<T>>,
) -> Result<DerivativeTable<T>> {
    if let Some(o) = oracle {
        if o.strikes != strikes {
            return Err(Error::InvalidInput("oracle strikes differ from the table strikes".into()));
        }
    }
    let EvalSamples { r, x_hat, m_hat } = samples;
    let up_f = upper_future_terms(r, x_hat)?;
    let (lo_f, penalty) = lower_terms(r, m_hat)?;
    let neg = -T::one();
    let fut_up = mean_estimate(&up_f);
    let fut_lo = penalised_estimate(&lo_f, &penalty, neg);
    let plain = plain_lsmc_estimates(x_hat, strikes);
    let (vol_swap, sqrt_var_swap) = jensen_bounds(r);

    let future = Quad {
        lower: fut_lo,
        upper: fut_up,
        plain: plain.future,
        oracle: oracle.map(|o| o.future),
    };

    let mut rows = Vec::with_capacity(strikes.len());
    for (ki, &k) in strikes.iter().enumerate() {
        let up_c = upper_cap_terms(r, x_hat, k)?;
        let lo_c: Vec<T> = lo_f.iter().map(|&a| a.min(k)).collect();
        let cap_up = mean_estimate(&up_c);
        let cap_lo = penalised_estimate(&lo_c, &penalty, neg);

        let d_up: Vec<T> = up_f.iter().zip(&lo_c).map(|(&u, &a)| u - a).collect();
        let d_lo: Vec<T> = lo_f.iter().zip(&up_c).map(|(&a, &u)| a - u).collect();
        let call_up = penalised_estimate(&d_up, &penalty, T::one()).with_value(fut_up.value - cap_lo.value);
        let call_lo = penalised_estimate(&d_lo, &penalty, neg).with_value(fut_lo.value - cap_up.value);

        let cap = Quad {
            lower: cap_lo,
            upper: cap_up,
            plain: plain.cap[ki],
            oracle: oracle.map(|o| o.cap[ki]),
        };
        let call = Quad {
            lower: call_lo,
            upper: call_up,
            plain: plain.call[ki],
            oracle: oracle.map(|o| o.call[ki]),
        };
        let put = Quad {
            lower: cap_up.with_value(k - cap_up.value),
            upper: cap_lo.with_value(k - cap_lo.value),
            plain: plain.put[ki],
            oracle: oracle.map(|o| o.put[ki]),
        };
        let shift = |e: BoundEstimate<T>| e.with_value(e.value - k);
        let swap = Quad {
            lower: shift(future.lower),
            upper: shift(future.upper),
            plain: shift(future.plain),
            oracle: future.oracle.map(shift),
        };
        rows.push(StrikeRow {
            strike: k,
            cap,
            call,
            put,
            swap,
        });
    }
    Ok(DerivativeTable {
        future,
        vol_swap,
        sqrt_var_swap,
        rows,
    })
}

pub const TABLE_HEADER: &str = "instrument,strike,lower,lower_ci,upper,upper_ci,plain,plain_ci,oracle,oracle_ci";

/// Number formatting for serialised tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    /// Fixed decimals, as in printed price tables.
    Fixed(usize),
    /// Shortest representation that round-trips the stored `f64`.
    Full,
}

pub(crate) fn fmt_num<T: Real>(x: T, prec: Precision) -> String {
    match prec {
        Precision::Fixed(d) => format!("{:.*}", d, x.as_f64()),
        Precision::Full => format!("{}", x.as_f64()),
    }
}

fn fmt_est<T: Real>(e: Option<&BoundEstimate<T>>, prec: Precision) -> String {
    match e {
        Some(e) => format!("{},{}", fmt_num(e.value, prec), fmt_num(e.ci_half, prec)),
        None => ",".to_string(),
    }
}

impl<T: Real> DerivativeTable<T> {
    /// Comma-separated table with one row per instrument and strike.
    pub fn to_csv(&self, prec: Precision) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{TABLE_HEADER}");
        let quad_line = |out: &mut String, name: &str, strike: Option<T>, q: &Quad<T>| {
            let _ = writeln!(
                out,
                "{name},{},{},{},{},{}",
                strike.map(|k| fmt_num(k, prec)).unwrap_or_default(),
                fmt_est(Some(&q.lower), prec),
                fmt_est(Some(&q.upper), prec),
                fmt_est(Some(&q.plain), prec),
                fmt_est(q.oracle.as_ref(), prec),
            );
        };
        quad_line(&mut out, "future", None, &self.future);
        let _ = writeln!(
            out,
            "jensen,,{},{},,,,",
            fmt_est(Some(&self.vol_swap), prec),
            fmt_est(Some(&self.sqrt_var_swap), prec),
        );
        for (name, pick) in [
            ("cap", (|r: &StrikeRow<T>| r.cap) as fn(&StrikeRow<T>) -> Quad<T>),
            ("call", |r| r.call),
            ("put", |r| r.put),
            ("swap", |r| r.swap),
        ] {
            for row in &self.rows {
                quad_line(&mut out, name, Some(row.strike), &pick(row));
            }
        }
        out
    }
}
