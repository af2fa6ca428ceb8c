//! Flat `key = value` run configuration.
//!
//! Keys follow the model parameter table; omitted keys take the reference values. A
//! resolved configuration prints back as a manifest that parses to the same run.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::LsvParams;
use crate::regress::{BasisSpec, Hedge};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: LsvParams<f64>,
    /// Regression paths `N`.
    pub n_fit: usize,
    /// Evaluation paths `N_tilde`.
    pub n_eval: usize,
    pub basis: BasisSpec,
    pub antithetic: bool,
    pub strikes: Vec<f64>,
    pub seed_fit: u64,
    pub seed_eval: u64,
    /// Zero disables the nested oracle.
    pub oracle_n_outer: usize,
    pub oracle_n_inner: usize,
    pub oracle_seed: u64,
    pub sweep_param: Option<String>,
    pub sweep_values: Vec<f64>,
    pub convergence_paths: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: LsvParams::table1(),
            n_fit: 100_000,
            n_eval: 500_000,
            basis: BasisSpec::LOWER,
            antithetic: true,
            strikes: vec![15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0],
            seed_fit: 1,
            seed_eval: 2,
            oracle_n_outer: 0,
            oracle_n_inner: 1000,
            oracle_seed: 3,
            sweep_param: None,
            sweep_values: Vec::new(),
            convergence_paths: Vec::new(),
        }
    }
}

/// Parameters a sweep may vary.
pub const SWEEPABLE: &[&str] = &["rho", "eta", "alpha", "kappa", "theta", "v0", "s0"];

/// Evaluates a number written as a sum of terms, each a decimal or a ratio (`1+1/12`).
pub fn parse_number(text: &str) -> Option<f64> {
    let t = text.trim();
    if t.is_empty() {
        return None;
    }
    if let Ok(x) = t.parse::<f64>() {
        return Some(x);
    }
    let mut total = 0.0;
    let mut sign = 1.0;
    let mut term = String::new();
    let flush = |term: &str, sign: f64, total: &mut f64| -> Option<()> {
        let term = term.trim();
        let v = match term.split_once('/') {
            Some((a, b)) => a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?,
            None => term.parse::<f64>().ok()?,
        };
        *total += sign * v;
        Some(())
    };
    for (i, c) in t.char_indices() {
        let prev_e = term.ends_with(['e', 'E']);
        if (c == '+' || c == '-') && i > 0 && !prev_e && !term.trim().is_empty() {
            flush(&term, sign, &mut total)?;
            term.clear();
            sign = if c == '-' { -1.0 } else { 1.0 };
        } else {
            term.push(c);
        }
    }
    flush(&term, sign, &mut total)?;
    total.is_finite().then_some(total)
}

fn parse_list<T>(text: &str, f: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    let t = text.trim();
    if t.is_empty() {
        return Some(Vec::new());
    }
    t.split(',').map(|x| f(x.trim())).collect()
}

fn parse_count(text: &str) -> Option<usize> {
    let x = parse_number(text)?;
    (x >= 0.0 && x.fract() == 0.0 && x <= usize::MAX as f64).then_some(x as usize)
}

fn parse_bool(text: &str) -> Option<bool> {
    match text.trim() {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut sigma0 = None;
        let mut saw_v0 = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                location: format!("line {lineno}"),
                message: "expected key = value".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let err = |msg: &str| Error::Config {
                location: format!("line {lineno}, key {key}"),
                message: format!("{msg}: {value:?}"),
            };
            let num = || parse_number(value).ok_or_else(|| err("not a number"));
            let count = || parse_count(value).ok_or_else(|| err("not a non-negative integer"));
            let seed = || value.parse::<u64>().map_err(|_| err("not an unsigned 64-bit seed"));
            let p = &mut cfg.params;
            match key {
                "s0" => p.s0 = num()?,
                "v0" => {
                    p.v0 = num()?;
                    saw_v0 = true;
                }
                "sigma0" => sigma0 = Some(num()?),
                "alpha" => p.alpha = num()?,
                "kappa" => p.kappa = num()?,
                "theta" => p.theta = num()?,
                "eta" => p.eta = num()?,
                "rho" => p.rho = num()?,
                "vol_floor" => p.vol_floor = num()?,
                "vol_cap" => p.vol_cap = num()?,
                "t0" => p.t0 = num()?,
                "T" => p.t_end = num()?,
                "dt" => p.dt = num()?,
                "N" => cfg.n_fit = count()?,
                "N_tilde" => cfg.n_eval = count()?,
                "psi_degree" => cfg.basis.psi_degree = count()?,
                "phi_degree" => cfg.basis.phi_degree = count()?,
                "standardize" => cfg.basis.standardize = parse_bool(value).ok_or_else(|| err("not a boolean"))?,
                "hedge" => cfg.basis.hedge = Hedge::parse(value).ok_or_else(|| err("expected split or shared"))?,
                "antithetic" => cfg.antithetic = parse_bool(value).ok_or_else(|| err("not a boolean"))?,
                "strikes" => cfg.strikes = parse_list(value, parse_number).ok_or_else(|| err("not a number list"))?,
                "seed_fit" => cfg.seed_fit = seed()?,
                "seed_eval" => cfg.seed_eval = seed()?,
                "oracle.n_outer" => cfg.oracle_n_outer = count()?,
                "oracle.n_inner" => cfg.oracle_n_inner = count()?,
                "oracle.seed" => cfg.oracle_seed = seed()?,
                "sweep.param" => cfg.sweep_param = Some(value.to_string()),
                "sweep.values" => {
                    cfg.sweep_values = parse_list(value, parse_number).ok_or_else(|| err("not a number list"))?
                }
                "convergence.paths" => {
                    cfg.convergence_paths = parse_list(value, parse_count).ok_or_else(|| err("not a count list"))?
                }
                _ => return Err(err("unknown key")),
            }
        }
        if let Some(s) = sigma0 {
            if saw_v0 {
                let implied = cfg.params.sigma(cfg.params.s0, cfg.params.v0);
                if (implied - s).abs() > 1e-9 * s.abs().max(1.0) {
                    return Err(Error::Config {
                        location: "key sigma0".into(),
                        message: format!("sigma0 = {s} contradicts v0 (implied {implied})"),
                    });
                }
            } else {
                cfg.params.v0 = s * s;
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    /// Cross-field checks on a resolved configuration.
    pub fn check(&self) -> Result<()> {
        let cfg_err = |location: &str, message: String| Error::Config {
            location: location.into(),
            message,
        };
        self.params
            .validate()
            .map_err(|e| cfg_err("model parameters", e.to_string()))?;
        if self.antithetic && (self.n_fit % 2 != 0 || self.n_eval % 2 != 0) {
            return Err(cfg_err("N, N_tilde", "antithetic sampling needs even path counts".into()));
        }
        if self.n_eval == 0 {
            return Err(cfg_err("N_tilde", "must be positive".into()));
        }
        let width = self.basis.width(self.params.window_steps());
        if self.n_fit < 10 * width {
            return Err(cfg_err(
                "N",
                format!("{} regression paths for {width} columns; need at least {}", self.n_fit, 10 * width),
            ));
        }
        if self.strikes.iter().any(|&k| !(k >= 0.0)) {
            return Err(cfg_err("strikes", "strikes must be non-negative".into()));
        }
        if self.oracle_n_outer > 0 {
            if self.oracle_n_outer < 2 || self.oracle_n_inner < 2 {
                return Err(cfg_err("oracle", "n_outer and n_inner must be at least 2".into()));
            }
            if self.oracle_n_outer > self.n_eval {
                return Err(cfg_err(
                    "oracle.n_outer",
                    "oracle reuses evaluation paths; n_outer cannot exceed N_tilde".into(),
                ));
            }
        }
        if let Some(p) = &self.sweep_param {
            if !SWEEPABLE.contains(&p.as_str()) {
                return Err(cfg_err("sweep.param", format!("cannot sweep {p:?}")));
            }
        }
        if self.convergence_paths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(cfg_err("convergence.paths", "path counts must increase".into()));
        }
        Ok(())
    }

    /// Returns a copy with one model parameter replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut c = self.clone();
        let p = &mut c.params;
        match name {
            "rho" => p.rho = value,
            "eta" => p.eta = value,
            "alpha" => p.alpha = value,
            "kappa" => p.kappa = value,
            "theta" => p.theta = value,
            "v0" => p.v0 = value,
            "s0" => p.s0 = value,
            other => {
                return Err(Error::Config {
                    location: "sweep parameter".into(),
                    message: format!("cannot sweep {other:?}; choose one of {}", SWEEPABLE.join(", ")),
                })
            }
        }
        c.check()?;
        Ok(c)
    }

    /// Fully resolved configuration in the same `key = value` format.
    pub fn to_manifest(&self) -> String {
        let p = &self.params;
        let list = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        let _ = writeln!(out, "# resolved run configuration");
        let _ = writeln!(out, "s0 = {}", p.s0);
        let _ = writeln!(out, "v0 = {}", p.v0);
        let _ = writeln!(out, "# sigma0 = {} (implied)", p.sigma(p.s0, p.v0));
        let _ = writeln!(out, "alpha = {}", p.alpha);
        let _ = writeln!(out, "kappa = {}", p.kappa);
        let _ = writeln!(out, "theta = {}", p.theta);
        let _ = writeln!(out, "eta = {}", p.eta);
        let _ = writeln!(out, "rho = {}", p.rho);
        let _ = writeln!(out, "vol_floor = {}", p.vol_floor);
        let _ = writeln!(out, "vol_cap = {}", p.vol_cap);
        let _ = writeln!(out, "t0 = {}", p.t0);
        let _ = writeln!(out, "T = {}", p.t_end);
        let _ = writeln!(out, "dt = {}", p.dt);
        let _ = writeln!(out, "N = {}", self.n_fit);
        let _ = writeln!(out, "N_tilde = {}", self.n_eval);
        let _ = writeln!(out, "psi_degree = {}", self.basis.psi_degree);
        let _ = writeln!(out, "phi_degree = {}", self.basis.phi_degree);
        let _ = writeln!(out, "standardize = {}", self.basis.standardize);
        let _ = writeln!(out, "hedge = {}", self.basis.hedge.name());
        let _ = writeln!(out, "antithetic = {}", self.antithetic);
        let _ = writeln!(out, "strikes = {}", list(&self.strikes));
        let _ = writeln!(out, "seed_fit = {}", self.seed_fit);
        let _ = writeln!(out, "seed_eval = {}", self.seed_eval);
        let _ = writeln!(out, "oracle.n_outer = {}", self.oracle_n_outer);
        let _ = writeln!(out, "oracle.n_inner = {}", self.oracle_n_inner);
        let _ = writeln!(out, "oracle.seed = {}", self.oracle_seed);
        if let Some(sp) = &self.sweep_param {
            let _ = writeln!(out, "sweep.param = {sp}");
            let _ = writeln!(out, "sweep.values = {}", list(&self.sweep_values));
        }
        if !self.convergence_paths.is_empty() {
            let c: Vec<String> = self.convergence_paths.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "convergence.paths = {}", c.join(","));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_reference_set() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.params, LsvParams::table1());
    }

    #[test]
    fn fractions_and_sums() {
        assert_eq!(parse_number("1/120"), Some(1.0 / 120.0));
        assert_eq!(parse_number("1+1/12"), Some(1.0 + 1.0 / 12.0));
        assert_eq!(parse_number("-0.5"), Some(-0.5));
        assert_eq!(parse_number("1e-3"), Some(1e-3));
        assert_eq!(parse_number("2.5e-1+1"), Some(1.25));
        assert_eq!(parse_number("abc"), None);
    }

    #[test]
    fn keys_override_defaults() {
        let c = RunConfig::parse("rho = 0.3\nT = 1+1/12\nstrikes = 20, 30\noracle.n_outer = 1000 # on\n").unwrap();
        assert_eq!(c.params.rho, 0.3);
        assert_eq!(c.strikes, vec![20.0, 30.0]);
        assert_eq!(c.oracle_n_outer, 1000);
    }

    #[test]
    fn sigma0_sets_v0() {
        let c = RunConfig::parse("sigma0 = 0.2").unwrap();
        assert!((c.params.v0 - 0.04).abs() < 1e-15);
        assert!(RunConfig::parse("sigma0 = 0.2\nv0 = 0.09").is_err());
        assert!(RunConfig::parse("sigma0 = 0.3\nv0 = 0.09").is_ok());
    }

    #[test]
    fn errors_name_line_and_key() {
        match RunConfig::parse("\nrho = abc") {
            Err(Error::Config { location, .. }) => assert_eq!(location, "line 2, key rho"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(RunConfig::parse("bogus = 1"), Err(Error::Config { .. })));
        assert!(matches!(RunConfig::parse("rho"), Err(Error::Config { .. })));
        assert!(matches!(RunConfig::parse("rho = 1.5"), Err(Error::Config { .. })));
        assert!(matches!(RunConfig::parse("N = 100"), Err(Error::Config { .. })));
    }

    #[test]
    fn manifest_round_trips() {
        let mut c = RunConfig::parse("eta = 0.25\nstrikes = 17.5\noracle.n_outer = 10").unwrap();
        c.sweep_param = Some("rho".into());
        c.sweep_values = vec![-0.8, 0.1];
        c.convergence_paths = vec![10_000, 50_000];
        let back = RunConfig::parse(&c.to_manifest()).unwrap();
        assert_eq!(back, c);
    }
}
