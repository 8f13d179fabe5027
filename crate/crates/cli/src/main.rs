//! `mpemba` command-line driver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical flag
//! (defective decomposition or another numerical breakdown), 1 I/O.

mod commands;
mod config;
mod figures;
mod output;

use clap::{Parser, Subcommand};
use config::RunConfig;
use figures::FigureName;
use mpemba::Error as CoreError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical flag: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Defective { .. }
            | CoreError::DegenerateStationary { .. }
            | CoreError::ComplexSlowMode { .. }
            | CoreError::NoSignChange(_)
            | CoreError::StepSizeUnderflow { .. }
            | CoreError::TooManySteps(_)
            | CoreError::FitWindow(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "mpemba", version, about = "Strong Mpemba effect in a driven-dissipative qutrit")]
struct Cli {
    /// Flat TOML run configuration; unset keys take reference values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Liouvillian eigenvalues, gap, timescales and condition number.
    Spectrum,
    /// Relaxation trajectory of the configured initial state.
    Evolve,
    /// Exceptional-point scan or location along Omega2/Omega1.
    Lep {
        #[command(subcommand)]
        action: LepAction,
    },
    /// Two-rotation preparation sequence for a state literal ("a,b,c" or "sme").
    Compile {
        state: String,
        /// Re-read the written sequence and check recomposition to 1e-10.
        #[arg(long)]
        verify: bool,
    },
    /// Tomography record simulation or maximum-likelihood reconstruction.
    Tomo {
        #[command(subcommand)]
        action: TomoAction,
    },
    /// Data bundle for one figure.
    Figure { name: FigureName },
}

#[derive(Subcommand)]
enum LepAction {
    Scan,
    Locate,
}

#[derive(Subcommand)]
enum TomoAction {
    Simulate,
    Reconstruct { record: PathBuf },
}

fn run(cli: Cli) -> Result<PathBuf, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    match cli.command {
        Command::Spectrum => commands::spectrum(&cfg),
        Command::Evolve => commands::evolve(&cfg),
        Command::Lep { action: LepAction::Scan } => commands::lep_scan_cmd(&cfg),
        Command::Lep { action: LepAction::Locate } => commands::lep_locate_cmd(&cfg),
        Command::Compile { state, verify } => commands::compile(&cfg, &state, verify),
        Command::Tomo { action: TomoAction::Simulate } => commands::tomo_simulate(&cfg),
        Command::Tomo { action: TomoAction::Reconstruct { record } } => commands::tomo_reconstruct(&cfg, &record),
        Command::Figure { name } => figures::run(&cfg, name),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("mpemba: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
