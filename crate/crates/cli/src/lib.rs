//! Library side of the `fdsim` command: argument parsing, run
//! configuration and the subcommands, which print through a caller-supplied
//! writer.

pub mod config;
pub mod run;

use std::io::Write;

use clap::{Args, Parser, Subcommand};
use fdsim_core::twoparticle::InteractionSign;

use config::{Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("config error: {field}: {message}")]
    Config { field: String, message: String },
    #[error("{0}")]
    NoSolution(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) | CliError::Failed(_) => 1,
            CliError::Config { .. } => 2,
            CliError::NoSolution(_) => 3,
            CliError::Validation(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<fdsim_core::Error> for CliError {
    fn from(e: fdsim_core::Error) -> Self {
        use fdsim_core::Error as E;
        match e {
            E::NoSolution { .. } | E::OutOfRange { .. } => CliError::NoSolution(e.to_string()),
            E::InvalidLattice(m) => CliError::Config { field: "lx/ly/boundary".into(), message: m },
            E::InvalidSchedule(m) => CliError::Config { field: "model".into(), message: m },
            E::InvalidArgument(m) => CliError::Config { field: "arguments".into(), message: m },
            other => CliError::Failed(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "fdsim", version, about = "Floquet doublon simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Quasi-energies of a cylinder over a k_y grid (spectrum.csv)
    Spectrum(Overrides),
    /// Chern numbers of every isolated band of a torus cell (chern.csv)
    Chern(Overrides),
    /// Interaction strength and effective angle at a decoupling point
    Decouple(DecoupleArgs),
    /// Stroboscopic evolution of one doublon on an open lattice
    Evolve(Overrides),
    /// Two-doublon decay probability sweep (pdec.csv), optionally tuned
    Stability(StabilityArgs),
    /// Brute-force equivalence checks
    Validate,
}

#[derive(Args)]
pub struct DecoupleArgs {
    /// Hopping angle in units of pi
    #[arg(long)]
    pub theta_over_pi: f64,
    /// Decoupling order
    #[arg(long, short)]
    pub k: u32,
    /// Hopping phase of the underlying link
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phi: f64,
    /// Report the U < 0 root
    #[arg(long)]
    pub attractive: bool,
    #[arg(long, conflicts_with = "csv")]
    pub json: bool,
    #[arg(long)]
    pub csv: bool,
}

#[derive(Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Also minimize P_dec over (U', U'')
    #[arg(long)]
    pub tune: bool,
}

/// Runs one parsed command, writing its report to `out`.
pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Spectrum(o) => run::spectrum(&RunConfig::load(&o)?, out),
        Command::Chern(o) => run::chern(&RunConfig::load(&o)?, out),
        Command::Evolve(o) => run::run_evolve(&RunConfig::load(&o)?, out),
        Command::Stability(a) => run::stability(&RunConfig::load(&a.overrides)?, a.tune, out),
        Command::Decouple(a) => run::decouple(
            &run::DecoupleRequest {
                theta_over_pi: a.theta_over_pi,
                k: a.k,
                phi: a.phi,
                sign: if a.attractive { InteractionSign::Attractive } else { InteractionSign::Repulsive },
                json: a.json,
                csv: a.csv,
            },
            out,
        ),
        Command::Validate => run::validate(out),
    }
}

/// Parses `args` (without the program name) and runs the command.
pub fn run_args<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(std::iter::once("fdsim".into()).chain(args.into_iter().map(Into::into)))
        .map_err(|e| CliError::Config { field: "arguments".into(), message: e.to_string() })?;
    execute(cli.command, out)
}
