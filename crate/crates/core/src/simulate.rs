//! Euler full-truncation simulation of the model with antithetic pairing.
//!
//! The variance uses the full-truncation scheme (`V+` in drift and diffusion); the
//! price is stepped in log space with the effective volatility frozen at the left end
//! of each step. Draws for path pair `j` come from substream `j`, the odd member of
//! each pair reusing the negated draws of the even one.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{LsvParams, TimeGrid};
use crate::rng::{NormalStream, DOMAIN_PATHS};
use crate::scalar::{pos, Real};

/// Which grid states are retained in the batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Recording {
    /// States on `[t0, T]` only.
    #[default]
    Window,
    /// States at every grid time from 0.
    FullGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub antithetic: bool,
    pub recording: Recording,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            antithetic: true,
            recording: Recording::Window,
        }
    }
}

/// How draws were laid out, enough to regenerate any single path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedInfo {
    pub seed: u64,
    pub domain: u64,
    pub antithetic: bool,
}

impl SeedInfo {
    /// Substream id and sign used by path `i`.
    pub fn stream_of(&self, i: usize) -> (u64, bool) {
        if self.antithetic {
            ((i / 2) as u64, i % 2 == 1)
        } else {
            (i as u64, false)
        }
    }
}

/// Simulated trajectories, window increments and realised variances.
///
/// State arrays are row-major, one row per path, columns are grid times starting at
/// `record_from`. Increment arrays hold the `n` window steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch<T> {
    pub n_paths: usize,
    pub grid: TimeGrid<T>,
    pub record_from: usize,
    pub s: Vec<T>,
    pub v: Vec<T>,
    pub dw_s: Vec<T>,
    pub dw_v: Vec<T>,
    /// `R(t0, T)` per path, in VIX points squared per annum.
    pub realised_var: Vec<T>,
    pub seed_info: SeedInfo,
}

/// Per-step constants shared by every path.
#[derive(Clone, Copy)]
pub(crate) struct Stepper<T> {
    p: LsvParams<T>,
    sqrt_dt: T,
    rho_perp: T,
    half: T,
}

impl<T: Real> Stepper<T> {
    pub(crate) fn new(p: &LsvParams<T>) -> Self {
        Self {
            p: *p,
            sqrt_dt: p.dt.sqrt(),
            rho_perp: pos(T::one() - p.rho * p.rho).sqrt(),
            half: T::lit(0.5),
        }
    }

    /// Advances `(s, v)` one step; returns `(sigma^2, dW^S, dW^V)` for the step.
    #[inline]
    pub(crate) fn step(&self, s: &mut T, v: &mut T, z1: T, z2: T) -> (T, T, T) {
        let p = &self.p;
        let dws = self.sqrt_dt * z1;
        let dwv = self.sqrt_dt * (p.rho * z1 + self.rho_perp * z2);
        let vp = pos(*v);
        let sig = p.sigma(*s, *v);
        let sig2 = sig * sig;
        *v = *v + p.kappa * (p.theta - vp) * p.dt + p.eta * vp.sqrt() * dwv;
        *s = *s * (-self.half * sig2 * p.dt + sig * dws).exp();
        (sig2, dws, dwv)
    }

    /// Multiplier turning a sum of window `sigma^2` into annualised VIX points squared.
    pub(crate) fn rv_scale(&self) -> T {
        let h = T::lit(100.0);
        h * h * self.p.dt / (self.p.t_end - self.p.t0)
    }
}

pub fn simulate_paths<T: Real>(
    p: &LsvParams<T>,
    n_paths: usize,
    seed: u64,
    antithetic: bool,
) -> Result<PathBatch<T>> {
    simulate_paths_with(
        p,
        n_paths,
        seed,
        SimOptions {
            antithetic,
            recording: Recording::Window,
        },
    )
}

pub fn simulate_paths_with<T: Real>(
    p: &LsvParams<T>,
    n_paths: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<PathBatch<T>> {
    let grid = p.grid()?;
    if n_paths == 0 {
        return Err(Error::InvalidInput("n_paths must be positive".into()));
    }
    if opts.antithetic && n_paths % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "antithetic sampling needs an even path count, got {n_paths}"
        )));
    }
    let n_total = grid.n_steps();
    let idx_t0 = grid.idx_t0;
    let n_win = grid.window_steps();
    let record_from = match opts.recording {
        Recording::Window => idx_t0,
        Recording::FullGrid => 0,
    };
    let cols = n_total - record_from + 1;
    let seed_info = SeedInfo {
        seed,
        domain: DOMAIN_PATHS,
        antithetic: opts.antithetic,
    };

    let mut s = vec![T::zero(); n_paths * cols];
    let mut v = vec![T::zero(); n_paths * cols];
    let mut dw_s = vec![T::zero(); n_paths * n_win];
    let mut dw_v = vec![T::zero(); n_paths * n_win];
    let mut rv = vec![T::zero(); n_paths];

    let unit = if opts.antithetic { 2 } else { 1 };
    let stepper = Stepper::new(p);
    let scale = stepper.rv_scale();

    s.par_chunks_mut(unit * cols)
        .zip(v.par_chunks_mut(unit * cols))
        .zip(dw_s.par_chunks_mut(unit * n_win))
        .zip(dw_v.par_chunks_mut(unit * n_win))
        .zip(rv.par_chunks_mut(unit))
        .enumerate()
        .for_each(|(u, ((((s_row, v_row), dws_row), dwv_row), rv_row))| {
            let mut rng = NormalStream::new(seed, DOMAIN_PATHS, u as u64);
            let mut st = [p.s0; 2];
            let mut vt = [p.v0; 2];
            let mut acc = [T::zero(); 2];
            for m in 0..unit {
                if record_from == 0 {
                    s_row[m * cols] = p.s0;
                    v_row[m * cols] = p.v0;
                }
            }
            for k in 0..n_total {
                let z1 = T::lit(rng.normal());
                let z2 = T::lit(rng.normal());
                for m in 0..unit {
                    let (a, b) = if m == 0 { (z1, z2) } else { (-z1, -z2) };
                    let (sig2, dws, dwv) = stepper.step(&mut st[m], &mut vt[m], a, b);
                    if k >= idx_t0 {
                        let l = k - idx_t0;
                        acc[m] = acc[m] + sig2;
                        dws_row[m * n_win + l] = dws;
                        dwv_row[m * n_win + l] = dwv;
                    }
                    if k + 1 >= record_from {
                        let c = k + 1 - record_from;
                        s_row[m * cols + c] = st[m];
                        v_row[m * cols + c] = vt[m];
                    }
                }
            }
            for m in 0..unit {
                rv_row[m] = scale * acc[m];
            }
        });

    Ok(PathBatch {
        n_paths,
        grid,
        record_from,
        s,
        v,
        dw_s,
        dw_v,
        realised_var: rv,
        seed_info,
    })
}

impl<T: Real> PathBatch<T> {
    /// Recorded grid times per path.
    pub fn cols(&self) -> usize {
        self.grid.n_steps() - self.record_from + 1
    }

    pub fn window_steps(&self) -> usize {
        self.grid.window_steps()
    }

    /// State of path `i` at grid index `k`; `k` must be recorded.
    pub fn state(&self, i: usize, k: usize) -> (T, T) {
        assert!(k >= self.record_from, "grid index {k} was not recorded");
        let idx = i * self.cols() + (k - self.record_from);
        (self.s[idx], self.v[idx])
    }

    pub fn restrict_to_window(&self) -> WindowView<'_, T> {
        WindowView { batch: self }
    }

    /// Writes the batch as a versioned little-endian binary dump.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        for x in [self.grid.t0(), self.grid.t_end(), self.grid.dt] {
            w.write_all(&x.as_f64().to_le_bytes())?;
        }
        for x in [
            self.grid.idx_t0 as u64,
            self.grid.n_steps() as u64,
            self.record_from as u64,
            self.n_paths as u64,
            self.seed_info.seed,
            self.seed_info.domain,
            self.seed_info.antithetic as u64,
        ] {
            w.write_all(&x.to_le_bytes())?;
        }
        for arr in [&self.s, &self.v, &self.dw_s, &self.dw_v, &self.realised_var] {
            for x in arr.iter() {
                w.write_all(&x.as_f64().to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::Format("not a path batch dump".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != DUMP_VERSION {
            return Err(Error::Format(format!("unsupported dump version {version}")));
        }
        let f64s = |r: &mut R, n: usize| -> Result<Vec<T>> {
            let mut out = Vec::with_capacity(n);
            let mut b = [0u8; 8];
            for _ in 0..n {
                r.read_exact(&mut b)?;
                out.push(T::lit(f64::from_le_bytes(b)));
            }
            Ok(out)
        };
        let hdr = f64s(&mut r, 3)?;
        let mut ints = [0u64; 7];
        for x in ints.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *x = u64::from_le_bytes(b);
        }
        let [idx_t0, n_steps, record_from, n_paths, seed, domain, anti] = ints.map(|x| x as usize);
        if idx_t0 > n_steps || record_from > idx_t0 {
            return Err(Error::Format("inconsistent grid header".into()));
        }
        let dt = hdr[2];
        let mut times: Vec<T> = (0..=n_steps).map(|k| T::lit(k as f64) * dt).collect();
        times[idx_t0] = hdr[0];
        times[n_steps] = hdr[1];
        let grid = TimeGrid { times, idx_t0, dt };
        let cols = n_steps - record_from + 1;
        let n_win = n_steps - idx_t0;
        let s = f64s(&mut r, n_paths * cols)?;
        let v = f64s(&mut r, n_paths * cols)?;
        let dw_s = f64s(&mut r, n_paths * n_win)?;
        let dw_v = f64s(&mut r, n_paths * n_win)?;
        let realised_var = f64s(&mut r, n_paths)?;
        Ok(Self {
            n_paths,
            grid,
            record_from,
            s,
            v,
            dw_s,
            dw_v,
            realised_var,
            seed_info: SeedInfo {
                seed: seed as u64,
                domain: domain as u64,
                antithetic: anti != 0,
            },
        })
    }
}

const DUMP_MAGIC: &[u8; 8] = b"LSVPATHS";
const DUMP_VERSION: u32 = 1;

/// States and increments on `[t0, T]`: `n + 1` states and `n` increments per path.
#[derive(Clone, Copy)]
pub struct WindowView<'a, T> {
    batch: &'a PathBatch<T>,
}

impl<'a, T: Real> WindowView<'a, T> {
    pub fn n_paths(&self) -> usize {
        self.batch.n_paths
    }

    /// Number of window steps `n`.
    pub fn n_steps(&self) -> usize {
        self.batch.window_steps()
    }

    /// State of path `i` at window time `l` (`0 ..= n`).
    #[inline]
    pub fn state(&self, i: usize, l: usize) -> (T, T) {
        self.batch.state(i, self.batch.grid.idx_t0 + l)
    }

    /// `(dW^S, dW^V)` of path `i` over window step `l` (`0 .. n`).
    #[inline]
    pub fn increment(&self, i: usize, l: usize) -> (T, T) {
        let idx = i * self.n_steps() + l;
        (self.batch.dw_s[idx], self.batch.dw_v[idx])
    }

    pub fn realised_var(&self, i: usize) -> T {
        self.batch.realised_var[i]
    }

    pub fn path(&self, i: usize) -> PathWindow<'a, T> {
        let n = self.n_steps();
        let cols = self.batch.cols();
        let off = i * cols + (self.batch.grid.idx_t0 - self.batch.record_from);
        PathWindow {
            s: &self.batch.s[off..off + n + 1],
            v: &self.batch.v[off..off + n + 1],
            dw_s: &self.batch.dw_s[i * n..(i + 1) * n],
            dw_v: &self.batch.dw_v[i * n..(i + 1) * n],
        }
    }
}

/// One path's window states and increments.
#[derive(Debug, Clone, Copy)]
pub struct PathWindow<'a, T> {
    pub s: &'a [T],
    pub v: &'a [T],
    pub dw_s: &'a [T],
    pub dw_v: &'a [T],
}

impl<T: Real> PathWindow<'_, T> {
    pub fn n_steps(&self) -> usize {
        self.dw_s.len()
    }
}
