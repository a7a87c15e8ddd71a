//! Experiment runner for the `red` command: configuration, task execution
//! and run-directory artifacts.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::{ExperimentConfig, Resolved, Task};
pub use error::CliError;
pub use run::synthesize_degraded;

#[derive(Debug, Parser)]
#[command(name = "red", version, about = "Regularization-by-denoising experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Restore a blurred, noisy image.
    Deblur(CommonArgs),
    /// Restore a blurred, decimated, noisy image.
    Superres(CommonArgs),
    /// Measure homogeneity, passivity and the directional-derivative gap of an engine.
    CheckEngine(CommonArgs),
    /// Run RED and the Plug-and-Play baseline on the same input, plus a beta sweep.
    Compare(CommonArgs),
    /// Kernelize a quadratic prior and check its induced denoiser.
    DerivePrior(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set solver.lambda=0.12`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Command {
    fn split(self) -> (Task, CommonArgs) {
        match self {
            Self::Deblur(a) => (Task::Deblur, a),
            Self::Superres(a) => (Task::SuperRes, a),
            Self::CheckEngine(a) => (Task::CheckEngine, a),
            Self::Compare(a) => (Task::Compare, a),
            Self::DerivePrior(a) => (Task::DerivePrior, a),
        }
    }
}

/// Parses flags and the configuration into a resolved configuration.
pub fn configure(task: Task, args: CommonArgs) -> Result<Resolved, CliError> {
    let mut cfg = config::load(args.config.as_deref(), &args.set)?;
    if let Some(out) = args.out {
        cfg.out = Some(out);
    }
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    cfg.resolve(task)
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (task, args) = cli.command.split();
    match configure(task, args).and_then(|cfg| run::run(&cfg)) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("red {}: {e}", task.name());
            e.exit_code()
        }
    }
}
