//! The `nfl` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod format;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const THREADS_ENV: &str = "NFL_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] nfl_core::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// 1 for configuration and validation, 2 for a violated hypothesis,
    /// 3 for an exhausted budget.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_condition_violation() => 2,
            CliError::Core(e) if e.is_budget() => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nfl", version, about = "Collapse statistics of randomly perturbed self-similar sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write a JSON envelope {meta, rows} instead of CSV.
    #[arg(long, global = true)]
    pub json: bool,
    /// Random seed (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Similarity dimension of the noiseless system.
    Dim {
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Monte Carlo estimate of the per-stage collapse probabilities.
    Simulate {
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        horizon: Option<usize>,
        /// uniform, cyclic or fixed.
        #[arg(long)]
        policy: Option<String>,
    },
    /// One random realization of the address tree.
    Tree {
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Three-valued noise: analytic (or enumerated) collapse table.
    Analytic1 {
        #[arg(long)]
        max_stage: Option<usize>,
        /// Count all 3^n kick sequences instead of the closed form.
        #[arg(long)]
        exact: bool,
    },
    /// Density noise: collapse table from density propagation.
    Analytic2 {
        #[arg(long)]
        max_stage: Option<usize>,
        #[arg(long)]
        resolution: Option<usize>,
        /// Directory for per-stage density dumps.
        #[arg(long)]
        dump_dir: Option<PathBuf>,
    },
    /// Tent-map noise: truncation stage against its bound.
    Chaos {
        #[arg(long)]
        epsilon: Option<f64>,
        /// A fraction "p/q" or a sweep "q<=N".
        #[arg(long)]
        x0: Option<String>,
        /// collapse or merge.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        max_stage: Option<usize>,
    },
    /// Surviving full-depth intervals of one realization.
    EmitIntervals {
        #[arg(long)]
        depth: Option<usize>,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV}: expected a positive integer, got {raw:?}")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let path = cli
        .config
        .clone()
        .ok_or_else(|| CliError::Config("--config: a configuration file is required".into()))?;
    let cfg = config::RunConfig::load(&path)?;
    let output = commands::run(&cli, cfg)?;
    let rendered = if cli.json {
        format::render_json(&output.report, &output.meta)
    } else {
        format::render_csv(&output.report, &output.meta)
    };
    match output.out {
        Some(p) => std::fs::write(&p, rendered).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display())))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(rendered.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
