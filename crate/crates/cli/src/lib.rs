//! Command-line front end: reproduces the reference tail experiments and
//! exposes the classification, simulation and certificate operations with
//! file-based, hash-manifested outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod figures;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::{ExperimentConfig, DEFAULT_SEED};
use crate::error::CliError;
use crate::figures::Scale;

#[derive(Debug, Parser)]
#[command(
    name = "condgauss",
    version,
    about = "Tail experiments for conditionally Gaussian damped systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for parallel sections. Outputs do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the three damping variants of a reference figure.
    Reproduce {
        /// Reference figure, 1 to 4.
        #[arg(long)]
        figure: u8,
        /// Simulation horizon.
        #[arg(long, value_enum, default_value_t = Scale::Desk)]
        scale: Scale,
        /// Root seed for every noise stream.
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Output directory [default: out/figureN].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Quantile above which the tail fit starts.
        #[arg(long, default_value_t = 0.99)]
        tail_quantile: f64,
    },
    /// Predict the tail class; with `run.simulate = true` also fit it.
    Classify(Common),
    /// Long-run statistics, or an ensemble when `run.n_traj` is set.
    Simulate(Common),
    /// Exceedance frequencies of time-averaged damping.
    Ldp(Common),
    /// Feynman-Kac estimate of θ on a u-grid.
    Theta(Common),
    /// Membership check for the 𝒜_m damping class.
    AmCheck(Common),
    /// Scalar surrogate dampings on a u-grid.
    Surrogate(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat `key = value` file or JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: out/<command>].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `analysis.tail_quantile`.
    #[arg(long)]
    pub tail_quantile: Option<f64>,
    /// Comma-separated moment orders.
    #[arg(long)]
    pub p_grid: Option<String>,
}

impl Common {
    /// Loads the config and applies command-line overrides.
    pub fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(q) = self.tail_quantile {
            cfg.analysis.tail_quantile = q;
        }
        if let Some(p) = &self.p_grid {
            cfg.analysis.p_grid = p
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Config(format!("--p-grid `{p}`: {e}")))?;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_dir(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| Path::new("out").join(name))
}

pub fn run(command: &Command) -> Result<Outcome, CliError> {
    type Cmd = fn(&ExperimentConfig, &Path) -> Result<Outcome, CliError>;
    let (common, name, f): (&Common, &str, Cmd) = match command {
        Command::Reproduce {
            figure,
            scale,
            seed,
            out,
            tail_quantile,
        } => {
            let dir = out
                .clone()
                .unwrap_or_else(|| Path::new("out").join(format!("figure{figure}")));
            return commands::reproduce(*figure, *scale, *seed, *tail_quantile, &dir);
        }
        Command::Classify(c) => (c, "classify", commands::cmd_classify),
        Command::Simulate(c) => (c, "simulate", commands::cmd_simulate),
        Command::Ldp(c) => (c, "ldp", commands::cmd_ldp),
        Command::Theta(c) => (c, "theta", commands::cmd_theta),
        Command::AmCheck(c) => (c, "am-check", commands::cmd_am_check),
        Command::Surrogate(c) => (c, "surrogate", commands::cmd_surrogate),
    };
    let cfg = common.load()?;
    f(&cfg, &out_dir(&cfg, name))
}
