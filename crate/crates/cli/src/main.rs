//! `fdsim`: spectra, Chern numbers, doublon dynamics and stability sweeps
//! for the four-step Floquet hopping drive.

use std::process::ExitCode;

use clap::Parser;
use fdsim_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fdsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
