//! `strongsec`: batch runner for rate-region evaluation, coding simulations,
//! secrecy analysis and property suites.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use strongsec::codec::Epsilons;

use commands::Settings;
use error::CliError;
use output::{Format, Header};

#[derive(Debug, Parser)]
#[command(name = "strongsec", version, about = "Strong-secrecy coding experiments on broadcast channels")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Blocklengths, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Typicality parameters `cover,select,decode`.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1)]
    epsilon: Option<Vec<f64>>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Achievable rate pair and code-rate constraints.
    Region {
        #[command(subcommand)]
        action: RegionAction,
    },
    /// Monte Carlo error probabilities of the random code.
    Simulate,
    /// Effective secrecy, leakage and stealth at receiver 2.
    Secrecy {
        /// Sweep the randomization rate instead of reporting single codebooks.
        #[arg(long)]
        sweep: bool,
    },
    /// Property suites on random instances and on the configured scheme.
    Verify,
}

#[derive(Debug, Subcommand)]
enum RegionAction {
    /// Evaluate the configured scheme and rate points.
    Eval,
    /// Search auxiliary schemes for a frontier of rate pairs.
    Search {
        /// Write one re-loadable config per frontier point into this directory.
        #[arg(long)]
        emit_configs: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let c = cli.common;
    let path = c.config.ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let loaded = config::load(&path)?;
    if let Some(jobs) = c.jobs {
        set_jobs(jobs)?;
    }
    let cfg = &loaded.config;
    let eps = match c.epsilon.as_deref().map(<[f64]>::to_vec).or(cfg.epsilons.map(Vec::from)) {
        Some(e) if e.len() == 3 => Epsilons::new(e[0], e[1], e[2])?,
        Some(e) => return Err(CliError::Config(format!("expected three epsilons, found {}", e.len()))),
        None => Epsilons::default(),
    };
    let settings = Settings {
        seed: c.seed.or(cfg.seed).unwrap_or(0),
        trials: c.trials.or(cfg.trials),
        n: c.n.unwrap_or_else(|| cfg.n.clone()),
        epsilons: eps,
    };
    let (name, rows, default_format, suites_ok) = match cli.command {
        Command::Region { action: RegionAction::Eval } => ("region eval", commands::region_eval(&loaded)?, Format::Json, true),
        Command::Region { action: RegionAction::Search { emit_configs } } => {
            let dir = commands::configs_dir(emit_configs, cfg);
            ("region search", commands::region_search(&loaded, &settings, dir.as_deref())?, Format::Csv, true)
        }
        Command::Simulate => ("simulate", commands::simulate(&loaded, &settings)?, Format::Csv, true),
        Command::Secrecy { sweep: true } => ("secrecy sweep", commands::secrecy_sweep(&loaded, &settings)?, Format::Csv, true),
        Command::Secrecy { sweep: false } => ("secrecy", commands::secrecy(&loaded, &settings)?, Format::Json, true),
        Command::Verify => {
            let (rows, ok) = commands::verify(&loaded, &settings)?;
            ("verify", rows, Format::Json, ok)
        }
    };
    let header = Header::new(name, &loaded.sha256, settings.seed);
    let bytes = output::render(&header, &rows, c.format.unwrap_or(default_format))?;
    let out = c.out.or_else(|| cfg.outputs.as_ref().and_then(|o| o.path.clone()).map(PathBuf::from));
    output::emit(&bytes, out.as_deref())?;
    if !suites_ok {
        let failed: Vec<String> = rows
            .iter()
            .filter(|r| r["passed"] == false)
            .map(|r| format!("{} ({})", r["suite"].as_str().unwrap_or("?"), r["scope"].as_str().unwrap_or("?")))
            .collect();
        return Err(CliError::SuiteFailed(failed.join(", ")));
    }
    Ok(())
}

#[cfg(feature = "rayon")]
fn set_jobs(jobs: usize) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| CliError::Config(format!("--jobs: {e}")))
}

#[cfg(not(feature = "rayon"))]
fn set_jobs(_jobs: usize) -> Result<(), CliError> {
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("strongsec: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
