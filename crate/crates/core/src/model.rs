//! Capped/floored CEV-Heston local-stochastic-volatility model and its time grid.

use crate::error::{Error, Result};
use crate::scalar::{clamp, pos, Real};

const GRID_TOL: f64 = 1e-9;

/// Full parameter set of the model. Times are in years, variances annualised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsvParams<T> {
    pub s0: T,
    pub v0: T,
    /// Leverage exponent; the local factor is `(s / s0)^(alpha - 1)`.
    pub alpha: T,
    pub kappa: T,
    pub theta: T,
    pub eta: T,
    pub rho: T,
    pub vol_floor: T,
    pub vol_cap: T,
    /// VIX start date.
    pub t0: T,
    /// VIX end date.
    pub t_end: T,
    pub dt: T,
}

impl<T: Real> LsvParams<T> {
    /// Reference parameter set: one-month VIX starting in one year, ten steps in the window.
    pub fn table1() -> Self {
        Self {
            s0: T::lit(100.0),
            v0: T::lit(0.09),
            alpha: T::lit(0.8),
            kappa: T::lit(0.6),
            theta: T::lit(0.09),
            eta: T::lit(0.4),
            rho: T::lit(-0.5),
            vol_floor: T::lit(0.01),
            vol_cap: T::lit(10.0),
            t0: T::lit(1.0),
            t_end: T::lit(1.0 + 1.0 / 12.0),
            dt: T::lit(1.0 / 120.0),
        }
    }

    /// Unchecked effective volatility for the simulation hot loop.
    #[inline]
    pub fn sigma(&self, s: T, v: T) -> T {
        let mut x = pos(v).sqrt();
        if self.alpha != T::one() {
            x = x * (s / self.s0).powf(self.alpha - T::one());
        }
        clamp(x, self.vol_floor, self.vol_cap)
    }

    /// Returns every violated invariant; empty means the set is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let named = [
            ("s0", self.s0),
            ("v0", self.v0),
            ("alpha", self.alpha),
            ("kappa", self.kappa),
            ("theta", self.theta),
            ("eta", self.eta),
            ("rho", self.rho),
            ("vol_floor", self.vol_floor),
            ("vol_cap", self.vol_cap),
            ("t0", self.t0),
            ("t_end", self.t_end),
            ("dt", self.dt),
        ];
        for (name, x) in named {
            if !x.is_finite() {
                errs.push(format!("{name} is not finite"));
            }
        }
        if !errs.is_empty() {
            return errs;
        }
        let zero = T::zero();
        if self.s0 <= zero {
            errs.push("s0 must be positive".into());
        }
        if self.v0 < zero {
            errs.push("v0 must be non-negative".into());
        }
        if self.kappa < zero {
            errs.push("kappa must be non-negative".into());
        }
        if self.theta < zero {
            errs.push("theta must be non-negative".into());
        }
        if self.eta < zero {
            errs.push("eta must be non-negative".into());
        }
        if self.rho < -T::one() || self.rho > T::one() {
            errs.push("correlation out of range".into());
        }
        if self.vol_floor <= zero {
            errs.push("vol_floor must be positive".into());
        }
        if self.vol_floor >= self.vol_cap {
            errs.push("vol_floor must be below vol_cap".into());
        }
        if self.t0 < zero {
            errs.push("t0 must be non-negative".into());
        }
        if self.t_end <= self.t0 {
            errs.push("t_end must exceed t0".into());
        }
        if self.dt <= zero {
            errs.push("dt must be positive".into());
            return errs;
        }
        if !is_whole(self.t0 / self.dt) {
            errs.push("t0 not on grid".into());
        }
        if self.t_end > self.t0 && !is_whole((self.t_end - self.t0) / self.dt) {
            errs.push("window length is not a whole number of steps".into());
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(errs))
        }
    }

    /// Number of steps between `t0` and `t_end`.
    pub fn window_steps(&self) -> usize {
        ((self.t_end - self.t0) / self.dt).round().to_usize().unwrap_or(0)
    }

    /// Number of steps between 0 and `t0`.
    pub fn steps_to_t0(&self) -> usize {
        (self.t0 / self.dt).round().to_usize().unwrap_or(0)
    }

    /// Realised variance bounds implied by the volatility clamp, in VIX points squared.
    pub fn realised_var_range(&self) -> (T, T) {
        let h = T::lit(100.0);
        (
            h * h * self.vol_floor * self.vol_floor,
            h * h * self.vol_cap * self.vol_cap,
        )
    }

    pub fn grid(&self) -> Result<TimeGrid<T>> {
        self.validate()?;
        Ok(TimeGrid::new(self.t0, self.t_end, self.dt))
    }
}

fn is_whole<T: Real>(x: T) -> bool {
    (x - x.round()).abs().as_f64() <= GRID_TOL * x.abs().as_f64().max(1.0)
}

/// Checked effective volatility `clamp(sqrt(v+) * (s/s0)^(alpha-1), floor, cap)`.
pub fn effective_vol<T: Real>(p: &LsvParams<T>, s: T, v: T) -> Result<T> {
    if !s.is_finite() || !v.is_finite() {
        return Err(Error::InvalidInput(format!(
            "effective_vol needs finite inputs, got s={s}, v={v}"
        )));
    }
    if s <= T::zero() {
        return Err(Error::InvalidInput(format!(
            "effective_vol needs a positive price, got {s}"
        )));
    }
    Ok(p.sigma(s, v))
}

/// Uniform grid on `[0, t_end]` that contains `t0` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<T> {
    pub times: Vec<T>,
    pub idx_t0: usize,
    pub dt: T,
}

impl<T: Real> TimeGrid<T> {
    fn new(t0: T, t_end: T, dt: T) -> Self {
        let idx_t0 = (t0 / dt).round().to_usize().unwrap_or(0);
        let n = idx_t0 + ((t_end - t0) / dt).round().to_usize().unwrap_or(0);
        let mut times: Vec<T> = (0..=n).map(|k| T::lit(k as f64) * dt).collect();
        times[idx_t0] = t0;
        times[n] = t_end;
        Self { times, idx_t0, dt }
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Steps inside `[t0, t_end]`.
    pub fn window_steps(&self) -> usize {
        self.n_steps() - self.idx_t0
    }

    pub fn t0(&self) -> T {
        self.times[self.idx_t0]
    }

    pub fn t_end(&self) -> T {
        *self.times.last().expect("grid is never empty")
    }
}
