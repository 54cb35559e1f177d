use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use super::config::{Experiment, ExperimentConfig};
use super::verify::{evaluate_bounds, simulate, verify, Status};
use crate::carrier::{variation_norm_diff, Configuration};
use crate::error::{Error, Result};
use crate::matching::{d1, d1_prime};
use crate::par::with_threads;
use crate::renewal_kit::{check_lemma41, solve_renewal};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "STEINPP_THREADS";

#[derive(Parser, Debug)]
#[command(name = "steinpp", version, about = "Poisson process approximation bounds and their verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the bounds for an experiment config.
    Bound {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Emit seeded samples of the configured point process, one JSON
    /// configuration per line.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 10)]
        samples: u64,
    },
    /// Run a verification experiment and write report.json and tables/.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Solve the renewal equations for one component of a renewal config
    /// and print the solution as CSV.
    Renewal {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        component: usize,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distance between two configuration files.
    Metrics {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricArg::D1prime)]
        metric: MetricArg,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MetricArg {
    D1prime,
    D1,
    Variation,
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn read_configuration(path: &Path) -> Result<Configuration> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn run(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Bound { config, seed } => {
            let cfg = load(&config, seed)?;
            let (reports, skipped) = evaluate_bounds(&cfg)?;
            for s in &skipped {
                eprintln!("skipped {s}");
            }
            let out = serde_json::json!({ "experiment": cfg.experiment.name(), "bounds": reports });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(0)
        }
        Command::Simulate { config, seed, samples } => {
            let cfg = load(&config, seed)?;
            for c in simulate(&cfg, samples)? {
                println!("{}", serde_json::to_string(&c)?);
            }
            Ok(0)
        }
        Command::Verify { config, seed, output_dir } => {
            let cfg = load(&config, seed)?;
            let report = verify(&cfg)?;
            let dir = output_dir.unwrap_or_else(|| cfg.output_dir.clone());
            report.write(&dir)?;
            for r in &report.rows {
                let status = serde_json::to_value(r.status)?;
                println!(
                    "{:<8} {:<4} {:<22} distance {:<12} bound {}",
                    status.as_str().unwrap_or_default(),
                    r.metric,
                    r.param,
                    r.distance.map(|d| format!("{d:.6}")).unwrap_or_else(|| "-".into()),
                    r.bound.map(|b| format!("{b:.6}")).unwrap_or_else(|| "-".into()),
                );
            }
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!("check failed: {} ({})", c.name, c.detail);
            }
            if report.count(Status::Inconclusive) > 0 {
                eprintln!(
                    "warning: {} comparison(s) inconclusive within Monte Carlo noise",
                    report.count(Status::Inconclusive)
                );
            }
            println!("report written to {}", dir.join("report.json").display());
            Ok(report.exit_code())
        }
        Command::Renewal { config, component, step, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let Experiment::Renewal(params) = &cfg.experiment else {
                return Err(Error::Config("renewal needs a renewal experiment config".into()));
            };
            let specs = params.specs()?;
            let (_, spec) = specs.get(component).ok_or_else(|| {
                Error::Config(format!("no component {component} ({} configured)", specs.len()))
            })?;
            let sol = solve_renewal(spec, step.unwrap_or(params.step))?;
            let check = check_lemma41(spec, &sol);
            eprintln!("{}", serde_json::to_string(&check)?);
            let csv = sol.to_csv()?;
            match out {
                Some(p) => std::fs::write(p, csv)?,
                None => print!("{csv}"),
            }
            Ok(if check.holds { 0 } else { 2 })
        }
        Command::Metrics { a, b, metric } => {
            let (a, b) = (read_configuration(&a)?, read_configuration(&b)?);
            let v = match metric {
                MetricArg::D1prime => d1_prime(&a, &b),
                MetricArg::D1 => d1(&a, &b),
                MetricArg::Variation => variation_norm_diff(&a, &b) as f64,
            };
            println!("{v}");
            Ok(0)
        }
    }
}

fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok()
}

/// Entry point of the `steinpp` binary. Exit codes: 0 success, 1 usage or
/// configuration error, 2 failed verification.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match with_threads(threads_from_env(), || run(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
