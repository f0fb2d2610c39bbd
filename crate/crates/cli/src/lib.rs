//! Experiment runner for the `pesin` binary: typed TOML configs, seeded and
//! thread-count independent runs, CSV/JSON/SVG outputs.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

pub use config::ExperimentConfig;
pub use output::RunReport;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or configuration.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] pesin_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 1 usage/config, 2 verification failure, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use pesin_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(E::TransversalityFailure(_) | E::NonUniqueness { .. } | E::GapViolation { .. }) => 2,
            CliError::Core(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Lyapunov spectrum by QR reorthogonalization.
    Spectrum,
    /// Pesin-set certificates over a grid of points.
    Pesin,
    /// Local stable leaf against its oracle and the graph-transform ledger.
    Manifold,
    /// Holonomy map between two transversals.
    Holonomy,
    /// Jacobian of the holonomy by two estimators; exit 0 iff `max |J - 1| <= act_c`.
    VerifyAct,
    /// Collect the JSON reports found in the output directory.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Pesin => "pesin",
            Command::Manifold => "manifold",
            Command::Holonomy => "holonomy",
            Command::VerifyAct => "verify-act",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pesin", version, about = "Numerical experiments on stable manifolds of random dynamical systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment config (not needed for `report`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
}

/// Run a parsed command line. Returns the report (whose `pass` decides
/// between exit 0 and 2) or an error carrying its own exit code.
pub fn run(cli: &Cli) -> Result<RunReport, CliError> {
    if cli.threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;

    if cli.command == Command::Report {
        let out = cli.out.clone().or_else(|| cli.config.as_ref().and_then(|p| ExperimentConfig::load(p).ok()?.out)).unwrap_or_else(|| "out".into());
        return commands::report::run(&out);
    }

    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage(format!("`{}` needs --config", cli.command.name())))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.validate()?;
    }
    let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| "out".into());
    std::fs::create_dir_all(&out).map_err(|source| CliError::Io { path: out.clone(), source })?;

    let start = Instant::now();
    let report = pool.install(|| match cli.command {
        Command::Spectrum => commands::spectrum::run(&cfg, &out),
        Command::Pesin => commands::pesin::run(&cfg, &out),
        Command::Manifold => commands::manifold::run(&cfg, &out),
        Command::Holonomy => commands::holonomy::run(&cfg, &out),
        Command::VerifyAct => commands::holonomy::verify_act(&cfg, &out),
        Command::Report => unreachable!(),
    })?;
    report.write(&out)?;
    output::write_timing(&out, cli.command.name(), start.elapsed().as_secs_f64(), cli.threads)?;
    Ok(report)
}
