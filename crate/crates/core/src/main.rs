use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vix_bounds::config::{parse_number, RunConfig};
use vix_bounds::experiment::{
    convergence_csv, oracle_csv, run_convergence, run_oracle, run_price, run_sweep, sweep_csv, write_outputs,
};
use vix_bounds::Error;

#[derive(Parser)]
#[command(name = "vix-bounds", version, about = "Upper and lower Monte Carlo bounds for VIX derivatives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Futures, caps, calls and puts with bounds, plain regression estimates and optional oracle.
    Price(Common),
    /// Future bounds while one model parameter varies.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated parameter values.
        #[arg(long, allow_hyphen_values = true)]
        values: Option<String>,
    },
    /// Future bounds for both basis sizes at increasing path counts.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Comma-separated evaluation path counts.
        #[arg(long)]
        paths: Option<String>,
    },
    /// Nested Monte Carlo benchmark only.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed_fit: Option<u64>,
    #[arg(long)]
    seed_eval: Option<u64>,
    /// Worker threads, 0 for one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Config {
                    location: path.display().to_string(),
                    message: e.to_string(),
                })?;
                RunConfig::parse(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed_fit {
            cfg.seed_fit = s;
        }
        if let Some(s) = self.seed_eval {
            cfg.seed_eval = s;
        }
        if self.threads > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(self.threads)
                .build_global()
                .map_err(|e| Error::Config {
                    location: "--threads".into(),
                    message: e.to_string(),
                })?;
        }
        Ok(cfg)
    }
}

fn csv_list<T>(flag: &str, text: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, Error> {
    text.split(',')
        .map(|x| {
            f(x.trim()).ok_or_else(|| Error::Config {
                location: flag.into(),
                message: format!("cannot parse {x:?}"),
            })
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Price(common) => {
            let cfg = common.load()?;
            let res = run_price(&cfg)?;
            write_outputs(&common.out, "table", &cfg, |p| res.table.to_csv(p))?;
            fs::write(common.out.join("fit.txt"), res.fit.to_text())?;
            print!("{}", res.table.to_csv(vix_bounds::table::Precision::Fixed(4)));
        }
        Command::Sweep { common, param, values } => {
            let mut cfg = common.load()?;
            if let Some(p) = param {
                cfg.sweep_param = Some(p);
            }
            if let Some(v) = values {
                cfg.sweep_values = csv_list("--values", &v, parse_number)?;
            }
            let param = cfg.sweep_param.clone().ok_or_else(|| Error::Config {
                location: "--param".into(),
                message: "sweep needs a parameter name".into(),
            })?;
            cfg.check()?;
            let rows = run_sweep(&cfg, &param, &cfg.sweep_values)?;
            write_outputs(&common.out, "sweep", &cfg, |p| sweep_csv(&param, &rows, p))?;
            print!("{}", sweep_csv(&param, &rows, vix_bounds::table::Precision::Fixed(4)));
        }
        Command::Convergence { common, paths } => {
            let mut cfg = common.load()?;
            if let Some(p) = paths {
                cfg.convergence_paths = csv_list("--paths", &p, |x| {
                    parse_number(x).filter(|v| *v >= 0.0 && v.fract() == 0.0).map(|v| v as usize)
                })?;
            }
            cfg.check()?;
            let rows = run_convergence(&cfg, &cfg.convergence_paths)?;
            write_outputs(&common.out, "convergence", &cfg, |p| convergence_csv(&rows, p))?;
            print!("{}", convergence_csv(&rows, vix_bounds::table::Precision::Fixed(4)));
        }
        Command::Oracle(common) => {
            let cfg = common.load()?;
            let col = run_oracle(&cfg)?;
            write_outputs(&common.out, "oracle", &cfg, |p| oracle_csv(&col, p))?;
            print!("{}", oracle_csv(&col, vix_bounds::table::Precision::Fixed(4)));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerical(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
