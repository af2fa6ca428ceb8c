//! Joint least-squares regression for the conditional expected realised variance and
//! its martingale increments.
//!
//! Each design row holds `psi_j` evaluated at the `t0` state, followed for every window
//! step `l` by the hedge regressors built from `phi_j(state_l)`. With [`Hedge::Split`] the
//! price and variance legs get their own coefficients, `phi_j sigma dW^S_l` and
//! `phi_j eta/2 dW^V_l`; with [`Hedge::Shared`] one coefficient multiplies
//! `phi_j (sigma dW^S_l + eta/2 dW^V_l)`. Polynomials are over `(log(s/s0), sqrt(v+))`;
//! the shift by `log s0` spans the same space as raw `log s` and keeps the monomial
//! columns well conditioned.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::LsvParams;
use crate::qr::lstsq_pivoted;
use crate::scalar::{clamp, pos, Real};
use crate::simulate::{PathBatch, PathWindow};

/// Relative column norm below which a column is treated as dependent.
pub const DROP_TOL: f64 = 1e-10;
/// Largest tolerated share of paths with non-finite design entries.
pub const MAX_REJECT_SHARE: f64 = 1e-3;

/// How the `phi_j` act on the two Brownian increments of a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Hedge {
    /// Separate coefficients for the `dW^S` and `dW^V` legs.
    #[default]
    Split,
    /// One coefficient on `sigma dW^S + eta/2 dW^V`.
    Shared,
}

impl Hedge {
    pub fn legs(self) -> usize {
        match self {
            Hedge::Split => 2,
            Hedge::Shared => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Hedge::Split => "split",
            Hedge::Shared => "shared",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "split" => Some(Hedge::Split),
            "shared" => Some(Hedge::Shared),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSpec {
    pub psi_degree: usize,
    pub phi_degree: usize,
    pub standardize: bool,
    pub hedge: Hedge,
}

impl BasisSpec {
    pub const LOWER: Self = Self {
        psi_degree: 3,
        phi_degree: 2,
        standardize: true,
        hedge: Hedge::Split,
    };
    pub const HIGHER: Self = Self {
        psi_degree: 4,
        phi_degree: 3,
        standardize: true,
        hedge: Hedge::Split,
    };

    pub fn with_hedge(self, hedge: Hedge) -> Self {
        Self { hedge, ..self }
    }

    pub fn n_psi(&self) -> usize {
        n_monomials(self.psi_degree)
    }

    pub fn n_phi(&self) -> usize {
        n_monomials(self.phi_degree)
    }

    /// Regressors per window step.
    pub fn per_step(&self) -> usize {
        self.n_phi() * self.hedge.legs()
    }

    pub fn width(&self, n_steps: usize) -> usize {
        self.n_psi() + self.per_step() * n_steps
    }
}

pub fn n_monomials(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Evaluates every monomial `x^a y^b` with `a + b <= degree`, ordered by total degree
/// then by the power of `y`.
pub fn monomials<T: Real>(x: T, y: T, degree: usize, out: &mut Vec<T>) {
    out.clear();
    let mut px = Vec::with_capacity(degree + 1);
    let mut py = Vec::with_capacity(degree + 1);
    let (mut a, mut b) = (T::one(), T::one());
    for _ in 0..=degree {
        px.push(a);
        py.push(b);
        a = a * x;
        b = b * y;
    }
    for d in 0..=degree {
        for k in 0..=d {
            out.push(px[d - k] * py[k]);
        }
    }
}

/// Regression coordinates of a state.
#[inline]
fn coords<T: Real>(log_s0: T, s: T, v: T) -> (T, T) {
    (s.ln() - log_s0, pos(v).sqrt())
}

/// Appends the step regressors for one state and its increments.
#[allow(clippy::too_many_arguments)]
fn push_step<T: Real>(
    basis: &BasisSpec,
    p: &LsvParams<T>,
    log_s0: T,
    (s, v): (T, T),
    (dws, dwv): (T, T),
    buf: &mut Vec<T>,
    out: &mut Vec<T>,
) {
    let (x, y) = coords(log_s0, s, v);
    monomials(x, y, basis.phi_degree, buf);
    let leg_s = p.sigma(s, v) * dws;
    let leg_v = p.eta * T::lit(0.5) * dwv;
    match basis.hedge {
        Hedge::Shared => {
            let drive = leg_s + leg_v;
            out.extend(buf.iter().map(|&f| f * drive));
        }
        Hedge::Split => {
            out.extend(buf.iter().map(|&f| f * leg_s));
            out.extend(buf.iter().map(|&f| f * leg_v));
        }
    }
}

/// Raw (unstandardised) design row for one path.
pub fn design_row<T: Real>(basis: &BasisSpec, p: &LsvParams<T>, path: &PathWindow<'_, T>) -> Vec<T> {
    let mut row = Vec::with_capacity(basis.width(path.n_steps()));
    let mut buf = Vec::new();
    fill_row(basis, p, p.s0.ln(), path, &mut row, &mut buf);
    row
}

fn fill_row<T: Real>(
    basis: &BasisSpec,
    p: &LsvParams<T>,
    log_s0: T,
    path: &PathWindow<'_, T>,
    row: &mut Vec<T>,
    buf: &mut Vec<T>,
) {
    row.clear();
    let (x, y) = coords(log_s0, path.s[0], path.v[0]);
    monomials(x, y, basis.psi_degree, buf);
    row.extend_from_slice(buf);
    for l in 0..path.n_steps() {
        let state = (path.s[l], path.v[l]);
        push_step(basis, p, log_s0, state, (path.dw_s[l], path.dw_v[l]), buf, row);
    }
}

/// Centre and scale applied to one design column before factorisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnStat<T> {
    pub center: T,
    pub scale: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit<T> {
    pub basis: BasisSpec,
    pub n_steps: usize,
    /// `log s0` used to shift the price coordinate.
    pub log_shift: T,
    /// Coefficients of `psi_j` in raw coordinates.
    pub beta: Vec<T>,
    /// Step `l` owns `gamma[l * k..(l + 1) * k]` with `k = basis.per_step()`; under
    /// [`Hedge::Split`] the price-leg coefficients come first.
    pub gamma: Vec<T>,
    pub column_stats: Vec<ColumnStat<T>>,
    pub dropped_columns: Vec<usize>,
    pub residual_rms: T,
    pub n_rejected: usize,
}

/// Assembled regression problem in column-major layout.
pub struct Design<T> {
    pub rows: usize,
    pub width: usize,
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub rejected: usize,
}

impl<T: Real> Design<T> {
    pub fn build(batch: &PathBatch<T>, p: &LsvParams<T>, basis: &BasisSpec) -> Result<Self> {
        let w = batch.restrict_to_window();
        let n = w.n_steps();
        let width = basis.width(n);
        let log_s0 = p.s0.ln();
        let rows: Vec<Option<(Vec<T>, T)>> = (0..w.n_paths())
            .into_par_iter()
            .map_init(Vec::new, |buf, i| {
                let mut row = Vec::with_capacity(width);
                fill_row(basis, p, log_s0, &w.path(i), &mut row, buf);
                let r = w.realised_var(i);
                (r.is_finite() && row.iter().all(|x| x.is_finite())).then_some((row, r))
            })
            .collect();
        let rejected = rows.iter().filter(|r| r.is_none()).count();
        if rejected as f64 > MAX_REJECT_SHARE * w.n_paths() as f64 {
            return Err(Error::Numerical(format!(
                "{rejected} of {} paths have non-finite regressors",
                w.n_paths()
            )));
        }
        let kept: Vec<(Vec<T>, T)> = rows.into_iter().flatten().collect();
        let m = kept.len();
        let mut x = vec![T::zero(); m * width];
        x.par_chunks_mut(m).enumerate().for_each(|(j, col)| {
            for (i, (row, _)) in kept.iter().enumerate() {
                col[i] = row[j];
            }
        });
        let y = kept.iter().map(|(_, r)| *r).collect();
        Ok(Self {
            rows: m,
            width,
            x,
            y,
            rejected,
        })
    }

    pub fn column(&self, j: usize) -> &[T] {
        &self.x[j * self.rows..(j + 1) * self.rows]
    }

    /// Residuals `y - X c` for raw-coordinate coefficients.
    pub fn residuals(&self, fit: &RegressionFit<T>) -> Vec<T> {
        let coef = fit.raw_coefficients();
        let mut res = self.y.clone();
        for (j, &c) in coef.iter().enumerate() {
            if c != T::zero() {
                for (r, &x) in res.iter_mut().zip(self.column(j)) {
                    *r = *r - c * x;
                }
            }
        }
        res
    }
}

/// Fits `(beta, gamma)` by a single least-squares solve over the batch.
pub fn fit_lsmc<T: Real>(
    batch: &PathBatch<T>,
    p: &LsvParams<T>,
    basis: &BasisSpec,
) -> Result<RegressionFit<T>> {
    let n = batch.window_steps();
    let width = basis.width(n);
    if batch.n_paths < width {
        return Err(Error::Numerical(format!(
            "underdetermined regression: {} paths for {width} columns",
            batch.n_paths
        )));
    }
    if batch.n_paths < 10 * width {
        return Err(Error::InvalidInput(format!(
            "regression needs at least {} paths for {width} columns, got {}",
            10 * width,
            batch.n_paths
        )));
    }
    let design = Design::build(batch, p, basis)?;
    let m = design.rows;
    let n_psi = basis.n_psi();

    let stats: Vec<ColumnStat<T>> = (0..width)
        .into_par_iter()
        .map(|j| {
            if !basis.standardize {
                return ColumnStat {
                    center: T::zero(),
                    scale: T::one(),
                };
            }
            let col = design.column(j);
            let mf = T::lit(m as f64);
            // Only non-intercept psi columns are centred, so the psi and phi blocks keep
            // separate fitted values.
            let raw_rms = (col.iter().fold(T::zero(), |a, &x| a + x * x) / mf).sqrt();
            let unit = if raw_rms > T::zero() { raw_rms } else { T::one() };
            if j == 0 || j >= n_psi {
                return ColumnStat {
                    center: T::zero(),
                    scale: unit,
                };
            }
            let center = col.iter().fold(T::zero(), |a, &x| a + x) / mf;
            let sd = (col.iter().fold(T::zero(), |a, &x| a + (x - center) * (x - center)) / mf).sqrt();
            // A (numerically) constant column stays uncentred so pivoting sees it as a
            // copy of the intercept rather than as amplified rounding noise.
            if sd <= T::lit(DROP_TOL) * raw_rms {
                ColumnStat {
                    center: T::zero(),
                    scale: unit,
                }
            } else {
                ColumnStat { center, scale: sd }
            }
        })
        .collect();

    let mut a = design.x.clone();
    a.par_chunks_mut(m).zip(stats.par_iter()).for_each(|(col, st)| {
        for x in col.iter_mut() {
            *x = (*x - st.center) / st.scale;
        }
    });
    let mut b = design.y.clone();
    let sol = lstsq_pivoted(&mut a, &mut b, m, width, T::lit(DROP_TOL));
    if sol.rank == 0 {
        return Err(Error::Numerical("every design column is degenerate".into()));
    }

    let mut raw: Vec<T> = sol
        .coef
        .iter()
        .zip(&stats)
        .map(|(&c, st)| c / st.scale)
        .collect();
    let shift = (1..n_psi).fold(T::zero(), |acc, j| acc + raw[j] * stats[j].center);
    raw[0] = raw[0] - shift;

    let mut fit = RegressionFit {
        basis: *basis,
        n_steps: n,
        log_shift: p.s0.ln(),
        beta: raw[..n_psi].to_vec(),
        gamma: raw[n_psi..].to_vec(),
        column_stats: stats,
        dropped_columns: sol.dropped,
        residual_rms: T::zero(),
        n_rejected: design.rejected,
    };
    let res = design.residuals(&fit);
    let ss = res.iter().fold(T::zero(), |a, &r| a + r * r);
    fit.residual_rms = (ss / T::lit(m as f64)).sqrt();
    Ok(fit)
}

impl<T: Real> RegressionFit<T> {
    /// Coefficients in design-column order.
    pub fn raw_coefficients(&self) -> Vec<T> {
        self.beta.iter().chain(&self.gamma).copied().collect()
    }

    /// Unclamped `sum_j beta_j psi_j` at a `t0` state.
    pub fn psi_value(&self, s: T, v: T) -> T {
        let (x, y) = coords(self.log_shift, s, v);
        let mut buf = Vec::with_capacity(self.beta.len());
        monomials(x, y, self.basis.psi_degree, &mut buf);
        buf.iter().zip(&self.beta).fold(T::zero(), |a, (&f, &b)| a + f * b)
    }

    /// Serialises to the versioned plain-text coefficient format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# vix-bounds regression fit");
        let _ = writeln!(out, "version 1");
        let _ = writeln!(out, "psi_degree {}", self.basis.psi_degree);
        let _ = writeln!(out, "phi_degree {}", self.basis.phi_degree);
        let _ = writeln!(out, "standardize {}", self.basis.standardize as u8);
        let _ = writeln!(out, "hedge {}", self.basis.hedge.name());
        let _ = writeln!(out, "n_steps {}", self.n_steps);
        let _ = writeln!(out, "log_shift {}", self.log_shift.as_f64());
        let _ = writeln!(out, "residual_rms {}", self.residual_rms.as_f64());
        let _ = writeln!(out, "n_rejected {}", self.n_rejected);
        let dropped: Vec<String> = self.dropped_columns.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "dropped {}", dropped.join(" "));
        for (j, st) in self.column_stats.iter().enumerate() {
            let _ = writeln!(out, "stat {j} {} {}", st.center.as_f64(), st.scale.as_f64());
        }
        let _ = writeln!(out, "beta {}", join(&self.beta));
        let k = self.basis.per_step();
        for (l, g) in self.gamma.chunks(k).enumerate() {
            let _ = writeln!(out, "gamma {l} {}", join(g));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Format(format!("fit file line {line}: {msg}"));
        let mut version = None;
        let mut psi = None;
        let mut phi = None;
        let mut standardize = None;
        let mut hedge = Hedge::Shared;
        let mut n_steps = None;
        let mut log_shift = None;
        let mut residual_rms = T::zero();
        let mut n_rejected = 0usize;
        let mut dropped = Vec::new();
        let mut stats = Vec::new();
        let mut beta = None;
        let mut gamma_rows: Vec<(usize, Vec<T>)> = Vec::new();

        for (ln, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let key = it.next().unwrap_or_default();
            let rest: Vec<&str> = it.collect();
            let num = |s: &str| -> Result<f64> { s.parse::<f64>().map_err(|_| bad(ln, "bad number")) };
            let int = |s: &str| -> Result<usize> { s.parse::<usize>().map_err(|_| bad(ln, "bad integer")) };
            let one = || rest.first().copied().ok_or_else(|| bad(ln, "missing value"));
            match key {
                "version" => version = Some(int(one()?)?),
                "psi_degree" => psi = Some(int(one()?)?),
                "phi_degree" => phi = Some(int(one()?)?),
                "standardize" => standardize = Some(int(one()?)? != 0),
                "hedge" => hedge = Hedge::parse(one()?).ok_or_else(|| bad(ln, "unknown hedge form"))?,
                "n_steps" => n_steps = Some(int(one()?)?),
                "log_shift" => log_shift = Some(T::lit(num(one()?)?)),
                "residual_rms" => residual_rms = T::lit(num(one()?)?),
                "n_rejected" => n_rejected = int(one()?)?,
                "dropped" => {
                    dropped = rest.iter().map(|s| int(s)).collect::<Result<_>>()?;
                }
                "stat" => {
                    if rest.len() != 3 {
                        return Err(bad(ln, "stat needs index, center, scale"));
                    }
                    if int(rest[0])? != stats.len() {
                        return Err(bad(ln, "stat rows out of order"));
                    }
                    stats.push(ColumnStat {
                        center: T::lit(num(rest[1])?),
                        scale: T::lit(num(rest[2])?),
                    });
                }
                "beta" => {
                    beta = Some(rest.iter().map(|s| num(s).map(T::lit)).collect::<Result<Vec<T>>>()?);
                }
                "gamma" => {
                    let l = int(one()?)?;
                    let g = rest[1..].iter().map(|s| num(s).map(T::lit)).collect::<Result<Vec<T>>>()?;
                    gamma_rows.push((l, g));
                }
                other => return Err(bad(ln, &format!("unknown key {other:?}"))),
            }
        }
        if version != Some(1) {
            return Err(Error::Format("fit file: missing or unsupported version".into()));
        }
        let missing = |k: &str| Error::Format(format!("fit file: missing {k}"));
        let basis = BasisSpec {
            psi_degree: psi.ok_or_else(|| missing("psi_degree"))?,
            phi_degree: phi.ok_or_else(|| missing("phi_degree"))?,
            standardize: standardize.ok_or_else(|| missing("standardize"))?,
            hedge,
        };
        let n_steps = n_steps.ok_or_else(|| missing("n_steps"))?;
        let beta = beta.ok_or_else(|| missing("beta"))?;
        if beta.len() != basis.n_psi() {
            return Err(Error::Format("fit file: beta length does not match psi_degree".into()));
        }
        if gamma_rows.len() != n_steps {
            return Err(Error::Format("fit file: expected one gamma row per step".into()));
        }
        let mut gamma = Vec::with_capacity(n_steps * basis.per_step());
        for (expect, (l, g)) in gamma_rows.into_iter().enumerate() {
            if l != expect || g.len() != basis.per_step() {
                return Err(Error::Format(format!("fit file: malformed gamma row {l}")));
            }
            gamma.extend(g);
        }
        if !stats.is_empty() && stats.len() != basis.width(n_steps) {
            return Err(Error::Format("fit file: column stats do not match width".into()));
        }
        Ok(Self {
            basis,
            n_steps,
            log_shift: log_shift.ok_or_else(|| missing("log_shift"))?,
            beta,
            gamma,
            column_stats: stats,
            dropped_columns: dropped,
            residual_rms,
            n_rejected,
        })
    }
}

fn join<T: Real>(xs: &[T]) -> String {
    xs.iter().map(|x| x.as_f64().to_string()).collect::<Vec<_>>().join(" ")
}

/// Estimated conditional expected realised variance at a `t0` state, clamped to the
/// realised-variance range implied by the volatility floor and cap.
pub fn predict_x<T: Real>(fit: &RegressionFit<T>, p: &LsvParams<T>, s: T, v: T) -> T {
    clamp_x(p, fit.psi_value(s, v))
}

/// Applies the volatility floor and cap to a raw conditional-variance estimate.
pub fn clamp_x<T: Real>(p: &LsvParams<T>, raw: T) -> T {
    let (lo, hi) = p.realised_var_range();
    clamp(raw, lo, hi)
}

/// Fitted martingale increment `sum_l Phi_l(state_l) . dW_l` along one path.
pub fn predict_mart_increment<T: Real>(
    fit: &RegressionFit<T>,
    p: &LsvParams<T>,
    path: &PathWindow<'_, T>,
) -> T {
    let k = fit.basis.per_step();
    let mut buf = Vec::with_capacity(fit.basis.n_phi());
    let mut terms = Vec::with_capacity(k);
    let mut total = T::zero();
    for l in 0..path.n_steps().min(fit.n_steps) {
        let g = &fit.gamma[l * k..(l + 1) * k];
        terms.clear();
        let state = (path.s[l], path.v[l]);
        push_step(&fit.basis, p, fit.log_shift, state, (path.dw_s[l], path.dw_v[l]), &mut buf, &mut terms);
        total = terms.iter().zip(g).fold(total, |a, (&f, &c)| a + f * c);
    }
    total
}

/// `(x_hat, m_hat)` for every path of an evaluation batch.
pub fn predict_batch<T: Real>(
    fit: &RegressionFit<T>,
    p: &LsvParams<T>,
    batch: &PathBatch<T>,
) -> (Vec<T>, Vec<T>) {
    let w = batch.restrict_to_window();
    (0..w.n_paths())
        .into_par_iter()
        .map(|i| {
            let path = w.path(i);
            (
                predict_x(fit, p, path.s[0], path.v[0]),
                predict_mart_increment(fit, p, &path),
            )
        })
        .unzip()
}
