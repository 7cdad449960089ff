//! Command-line front end: configuration loading and the `simulate`,
//! `equilibria`, `connections` and `verify` workflows.
//!
//! Exit codes: 0 all checks pass, 1 a monitor or structure check failed,
//! 2 configuration error, 3 numerical failure.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{ExitStatus, Outputs, RunError};
pub use config::{ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "nlrd", version, about = "Nonlocal reaction-diffusion: simulate, equilibria, connections, verify")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    /// Integrate one trajectory and run the estimate monitors.
    Simulate,
    /// Find all equilibria.
    Equilibria,
    /// Shoot along unstable manifolds of previously found equilibria.
    Connections,
    /// Full property suite.
    Verify,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    Simulate(CommonArgs),
    Equilibria(CommonArgs),
    Connections(CommonArgs),
    Verify(CommonArgs),
}

impl Command {
    pub fn parts(&self) -> (CommandKind, &CommonArgs) {
        match self {
            Command::Simulate(a) => (CommandKind::Simulate, a),
            Command::Equilibria(a) => (CommandKind::Equilibria, a),
            Command::Connections(a) => (CommandKind::Connections, a),
            Command::Verify(a) => (CommandKind::Verify, a),
        }
    }
}

/// Load the config, apply flag overrides, run, and write outputs.
pub fn run(kind: CommandKind, args: &CommonArgs) -> Result<ExitStatus, RunError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(n) = args.modes {
        cfg.discretization.n_modes = n;
    }
    if let Some(s) = args.seed {
        cfg.analysis.seed = s;
    }
    let out_dir = match (&args.out, &cfg.output.dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => cfg.resolve(d),
        (None, None) => PathBuf::from("out"),
    };
    let mut outputs = Outputs::default();
    let status = match kind {
        CommandKind::Simulate => commands::cmd_simulate(&cfg, &mut outputs)?,
        CommandKind::Equilibria => commands::cmd_equilibria(&cfg, &mut outputs)?,
        CommandKind::Connections => commands::cmd_connections(&cfg, &out_dir, &mut outputs)?,
        CommandKind::Verify => commands::cmd_verify(&cfg, &mut outputs)?,
    };
    outputs.write(&out_dir)?;
    Ok(status)
}
