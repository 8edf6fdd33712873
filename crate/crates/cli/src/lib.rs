//! Command-line surface of the hamkoop pipeline: configuration, on-disk
//! formats, plots and the subcommands themselves.

pub mod commands;
pub mod config;
pub mod error;
pub mod store;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hamkoop::training::Variant;
use hamkoop::SystemName;

use config::{ConfigFile, ExperimentConfig, Overrides};
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "hamkoop", version, about = "Stable symplectic embeddings of Hamiltonian systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the preset's train and test trajectories.
    GenData(CommonArgs),
    /// Train an embedding model on the generated data.
    Train(CommonArgs),
    /// Roll a trained model out from every test initial condition.
    Rollout(CommonArgs),
    /// Compute error reports, phase-space and time-series tables.
    Eval(CommonArgs),
    /// Compute the cotangent-lift POD basis of a field dataset.
    Pod(CommonArgs),
    /// Fit the configured full-field decoder on POD coordinates.
    FitDecoder(CommonArgs),
    /// Render SVG plots from a finished evaluation.
    Plot(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named preset (used when no config file is given, or to override its system).
    #[arg(long)]
    pub preset: Option<SystemName>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Also write SVG plots (eval).
    #[arg(long)]
    pub plot: bool,
}

impl CommonArgs {
    /// Loads and validates the configuration; touches nothing on disk.
    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let file = self.config.as_deref().map(ConfigFile::load).transpose()?;
        let flags = Overrides {
            preset: self.preset,
            seed: self.seed,
            out: self.out.clone(),
            variant: self.variant,
            plot: self.plot,
        };
        ExperimentConfig::resolve(file, &flags)
    }
}

pub fn run(cli: &Cli) -> Result<String, CliError> {
    let (args, f): (&CommonArgs, fn(&ExperimentConfig) -> CliResult<String>) = match &cli.command {
        Command::GenData(a) => (a, commands::cmd_gen_data),
        Command::Train(a) => (a, commands::cmd_train),
        Command::Rollout(a) => (a, commands::cmd_rollout),
        Command::Eval(a) => (a, commands::cmd_eval),
        Command::Pod(a) => (a, commands::cmd_pod),
        Command::FitDecoder(a) => (a, commands::cmd_fit_decoder),
        Command::Plot(a) => (a, commands::cmd_plot),
    };
    let cfg = args.resolve()?;
    f(&cfg)
}
