//! Config-driven runner behind the `slowfast` binary.
//!
//! Every subcommand reads an optional JSON [`ExperimentConfig`], applies the
//! command-line overrides, writes `results.csv` and `summary.json` (plus
//! auxiliary CSVs where relevant) into the output directory and prints a
//! one-line summary. Exit codes: 0 success, 1 validation or I/O error,
//! 2 numeric divergence.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::ExperimentConfig;
use output::{digest, OutputDir, Provenance};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "slowfast", version, about = "Monte Carlo experiments for slow-fast stable-driven SDEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON experiment config; built-in defaults are used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Replica count override.
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Suppress the summary line.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample slow-fast paths.
    Simulate(Common),
    /// Sample frozen fast paths at fixed x.
    Frozen(Common),
    /// Invariant average and ergodic decay rate of an observable.
    Ergodic(Common),
    /// Truncated corrector value and finite-difference gradient.
    Corrector(Common),
    /// Strong error sweep over ε with log-log fit.
    RatesStrong(Common),
    /// Weak error sweep over ε with log-log fit.
    RatesWeak(Common),
    /// Closed-form versus finite-difference Jacobian checks.
    GeometryCheck {
        #[command(flatten)]
        common: Common,
        /// Single dimension to check (overrides the config list).
        #[arg(long)]
        dim: Option<usize>,
        /// Trials per dimension.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Reflection, ψ and Lyapunov drift checks.
    CouplingCheck(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Frozen(_) => "frozen",
            Command::Ergodic(_) => "ergodic",
            Command::Corrector(_) => "corrector",
            Command::RatesStrong(_) => "rates-strong",
            Command::RatesWeak(_) => "rates-weak",
            Command::GeometryCheck { .. } => "geometry-check",
            Command::CouplingCheck(_) => "coupling-check",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c)
            | Command::Frozen(c)
            | Command::Ergodic(c)
            | Command::Corrector(c)
            | Command::RatesStrong(c)
            | Command::RatesWeak(c)
            | Command::CouplingCheck(c) => c,
            Command::GeometryCheck { common, .. } => common,
        }
    }
}

/// Parse `argv` (including the program name), run the subcommand and map
/// the outcome to a process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(line) => {
            if !cli.command.common().quiet {
                println!("{line}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_divergence() {
                2
            } else {
                1
            }
        }
    }
}

/// Run a parsed subcommand and return its summary line.
pub fn execute(command: &Command) -> Result<String> {
    let common = command.common();
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if common.replicas == Some(0) {
        return Err(Error::Parameter("--replicas must be positive".into()));
    }
    let name = command.name();
    let out_root = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(name));
    let prov = Provenance {
        schema_version: config::SCHEMA_VERSION,
        subcommand: name.into(),
        seed: cfg.master_seed,
        config_digest: digest(&cfg)?,
    };
    let (dim, trials) = match command {
        Command::GeometryCheck { dim, trials, .. } => (*dim, *trials),
        _ => (None, None),
    };
    let ctx = commands::Context { prov, seed: cfg.master_seed, replicas: common.replicas, dim, trials };
    let mut out = OutputDir::create(&out_root)?;
    let mut body = move || match command {
        Command::Simulate(_) => commands::simulate(&cfg, &ctx, &mut out),
        Command::Frozen(_) => commands::frozen(&cfg, &ctx, &mut out),
        Command::Ergodic(_) => commands::ergodic(&cfg, &ctx, &mut out),
        Command::Corrector(_) => commands::corrector(&cfg, &ctx, &mut out),
        Command::RatesStrong(_) => commands::rates_strong(&cfg, &ctx, &mut out),
        Command::RatesWeak(_) => commands::rates_weak(&cfg, &ctx, &mut out),
        Command::GeometryCheck { .. } => commands::geometry_check(&cfg, &ctx, &mut out),
        Command::CouplingCheck(_) => commands::coupling_check(&cfg, &ctx, &mut out),
    };
    match common.workers {
        Some(0) => Err(Error::Parameter("--workers must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
            .install(body),
        None => body(),
    }
}
