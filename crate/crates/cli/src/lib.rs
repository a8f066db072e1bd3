//! Command-line front end for `polystab`: loads a TOML run configuration,
//! evaluates gauges, runs the verification suite, and exports closed-loop
//! trajectories as CSV.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
mod error;

pub use config::{BoxSpec, GaugeSpec, GridSpec, RunConfig, VerifySpec};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "polystab",
    version,
    about = "Bounded-input feedback stabilization over gauge-defined control sets"
)]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `epsilon` from the config.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// Overrides `output_path` from the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for portrait runs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
    /// Print reports as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the control-set gauge at a control vector.
    GaugeEval {
        #[arg(required = true, allow_negative_numbers = true, num_args = 1..)]
        u: Vec<f64>,
    },
    /// Check the CLF, small-control, tradeoff, large-ε and containment conditions.
    Verify,
    /// Simulate one closed-loop trajectory.
    Simulate {
        #[arg(required = true, allow_negative_numbers = true, num_args = 1..)]
        x0: Vec<f64>,
    },
    /// Simulate every initial state of the configured grid.
    Portrait,
}

impl Cli {
    /// The config file (or defaults) with command-line overrides applied.
    pub fn effective_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(eps) = self.epsilon {
            cfg.epsilon = eps;
        }
        if let Some(out) = &self.out {
            cfg.output_path = out.display().to_string();
        }
        Ok(cfg)
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = cli.effective_config()?;
    if cli.dump_config {
        return write!(out, "{}", cfg.to_toml()).map_err(|e| CliError::Io(e.to_string()));
    }
    let Some(command) = &cli.command else {
        return Err(CliError::Config(
            "no subcommand given (gauge-eval, verify, simulate, portrait)".into(),
        ));
    };
    let path = PathBuf::from(&cfg.output_path);
    match command {
        Command::GaugeEval { u } => commands::gauge_eval(&cfg, u, cli.json, out),
        Command::Verify => commands::verify(&cfg, cli.json, out),
        Command::Simulate { x0 } => commands::simulate(&cfg, x0, &path, cli.json, out),
        Command::Portrait => commands::portrait(&cfg, &path, cli.jobs, cli.json, out),
    }
}
