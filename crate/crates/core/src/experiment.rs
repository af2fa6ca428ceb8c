//! Experiment orchestration behind the command-line subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::oracle::{nested_price_from, reuse_outer_paths, OuterStates};
use crate::regress::{fit_lsmc, predict_batch, BasisSpec, RegressionFit};
use crate::simulate::simulate_paths;
use crate::stats::BoundEstimate;
use crate::table::{assemble, fmt_num, DerivativeTable, EvalSamples, Precision, PriceColumn};

/// Output of a single pricing run.
#[derive(Debug, Clone)]
pub struct PriceRun {
    pub table: DerivativeTable<f64>,
    pub fit: RegressionFit<f64>,
    /// Nested estimates of `E(R | F_t0)` on the first `oracle.n_outer` evaluation paths.
    pub oracle_x: Option<Vec<f64>>,
    pub eval: EvalData,
}

/// Per-path evaluation samples kept for diagnostics.
#[derive(Debug, Clone)]
pub struct EvalData {
    pub r: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub m_hat: Vec<f64>,
}

/// Fit batch, independent evaluation batch, optional nested oracle on shared outer paths.
pub fn run_price(cfg: &RunConfig) -> Result<PriceRun> {
    cfg.check()?;
    let p = &cfg.params;
    let fit = {
        let fit_batch = simulate_paths(p, cfg.n_fit, cfg.seed_fit, cfg.antithetic)?;
        fit_lsmc(&fit_batch, p, &cfg.basis)?
    };
    let eval_batch = simulate_paths(p, cfg.n_eval, cfg.seed_eval, cfg.antithetic)?;
    let (x_hat, m_hat) = predict_batch(&fit, p, &eval_batch);
    let outer: Option<OuterStates<f64>> =
        (cfg.oracle_n_outer > 0).then(|| reuse_outer_paths(&eval_batch).truncate(cfg.oracle_n_outer));
    let r = eval_batch.realised_var;

    let (oracle_col, oracle_x) = match outer {
        Some(o) => {
            let x = crate::oracle::nested_conditional_var(p, &o, cfg.oracle_n_inner, cfg.oracle_seed)?;
            (Some(crate::table::point_column(&x, &cfg.strikes)), Some(x))
        }
        None => (None, None),
    };
    let table = assemble(
        EvalSamples {
            r: &r,
            x_hat: &x_hat,
            m_hat: &m_hat,
        },
        &cfg.strikes,
        oracle_col.as_ref(),
    )?;
    check_finite(&table)?;
    Ok(PriceRun {
        table,
        fit,
        oracle_x,
        eval: EvalData { r, x_hat, m_hat },
    })
}

fn check_finite(t: &DerivativeTable<f64>) -> Result<()> {
    let ok = |e: &BoundEstimate<f64>| e.value.is_finite() && e.stderr.is_finite();
    if ok(&t.future.lower) && ok(&t.future.upper) && ok(&t.future.plain) {
        Ok(())
    } else {
        Err(Error::Numerical("non-finite future estimate".into()))
    }
}

/// Nested benchmark only; outer paths come from the evaluation seed.
pub fn run_oracle(cfg: &RunConfig) -> Result<PriceColumn<f64>> {
    cfg.check()?;
    if cfg.oracle_n_outer == 0 {
        return Err(Error::Config {
            location: "oracle.n_outer".into(),
            message: "oracle run needs oracle.n_outer > 0".into(),
        });
    }
    let p = &cfg.params;
    let n = cfg.oracle_n_outer;
    let batch = simulate_paths(p, n, cfg.seed_eval, cfg.antithetic && n % 2 == 0)?;
    nested_price_from(p, &reuse_outer_paths(&batch), cfg.oracle_n_inner, cfg.oracle_seed, &cfg.strikes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub plain: BoundEstimate<f64>,
    pub lower: BoundEstimate<f64>,
    pub upper: BoundEstimate<f64>,
}

/// Future bounds as one model parameter varies, everything else fixed.
pub fn run_sweep(cfg: &RunConfig, param: &str, values: &[f64]) -> Result<Vec<SweepRow>> {
    values
        .iter()
        .map(|&value| {
            let mut c = cfg.with_param(param, value)?;
            c.strikes.clear();
            c.oracle_n_outer = 0;
            let run = run_price(&c)?;
            let f = run.table.future;
            Ok(SweepRow {
                value,
                plain: f.plain,
                lower: f.lower,
                upper: f.upper,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n_paths: usize,
    pub basis: &'static str,
    pub lower: BoundEstimate<f64>,
    pub upper: BoundEstimate<f64>,
    pub plain: BoundEstimate<f64>,
    pub oracle: Option<BoundEstimate<f64>>,
}

/// Regression paths used alongside `n` evaluation paths (the reference 1:5 ratio).
pub fn fit_paths_for(n: usize) -> usize {
    (n / 5) & !1
}

/// Future bounds for both basis sizes at increasing path counts.
pub fn run_convergence(cfg: &RunConfig, path_counts: &[usize]) -> Result<Vec<ConvergenceRow>> {
    if path_counts.is_empty() || path_counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config {
            location: "--paths".into(),
            message: "path counts must be non-empty and increasing".into(),
        });
    }
    let oracle = if cfg.oracle_n_outer > 0 {
        let mut c = cfg.clone();
        c.strikes.clear();
        Some(run_oracle(&c)?.future)
    } else {
        None
    };
    let mut rows = Vec::new();
    for &n in path_counts {
        for (name, degrees) in [("lower", BasisSpec::LOWER), ("higher", BasisSpec::HIGHER)] {
            let mut c = cfg.clone();
            c.basis = BasisSpec {
                standardize: cfg.basis.standardize,
                hedge: cfg.basis.hedge,
                ..degrees
            };
            c.n_eval = n & !1;
            c.n_fit = fit_paths_for(n);
            c.strikes.clear();
            c.oracle_n_outer = 0;
            let f = run_price(&c)?.table.future;
            rows.push(ConvergenceRow {
                n_paths: n,
                basis: name,
                lower: f.lower,
                upper: f.upper,
                plain: f.plain,
                oracle,
            });
        }
    }
    Ok(rows)
}

fn est_fields(e: Option<&BoundEstimate<f64>>, prec: Precision) -> String {
    match e {
        Some(e) => format!("{},{}", fmt_num(e.value, prec), fmt_num(e.ci_half, prec)),
        None => ",".into(),
    }
}

pub fn sweep_csv(param: &str, rows: &[SweepRow], prec: Precision) -> String {
    let mut out = format!("{param},plain,plain_ci,lower,lower_ci,upper,upper_ci\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.value,
            est_fields(Some(&r.plain), prec),
            est_fields(Some(&r.lower), prec),
            est_fields(Some(&r.upper), prec)
        );
    }
    out
}

pub fn convergence_csv(rows: &[ConvergenceRow], prec: Precision) -> String {
    let mut out = String::from("n_paths,basis,lower,lower_ci,upper,upper_ci,plain,plain_ci,oracle,oracle_ci\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n_paths,
            r.basis,
            est_fields(Some(&r.lower), prec),
            est_fields(Some(&r.upper), prec),
            est_fields(Some(&r.plain), prec),
            est_fields(r.oracle.as_ref(), prec)
        );
    }
    out
}

pub fn oracle_csv(col: &PriceColumn<f64>, prec: Precision) -> String {
    let mut out = String::from("instrument,strike,oracle,oracle_ci\n");
    let _ = writeln!(out, "future,,{}", est_fields(Some(&col.future), prec));
    for (name, ests) in [("cap", &col.cap), ("call", &col.call), ("put", &col.put)] {
        for (k, e) in col.strikes.iter().zip(ests.iter()) {
            let _ = writeln!(out, "{name},{},{}", fmt_num(*k, prec), est_fields(Some(e), prec));
        }
    }
    out
}

/// Writes `<stem>.csv` at four decimals, `<stem>_raw.csv` at full precision and the
/// resolved manifest.
pub fn write_outputs(
    dir: &Path,
    stem: &str,
    cfg: &RunConfig,
    render: impl Fn(Precision) -> String,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{stem}.csv")), render(Precision::Fixed(4)))?;
    fs::write(dir.join(format!("{stem}_raw.csv")), render(Precision::Full))?;
    fs::write(dir.join("manifest.txt"), cfg.to_manifest())?;
    Ok(())
}
