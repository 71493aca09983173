//! `tmce`: batch front end for the translating mean curvature solvers.

mod config;
mod expr;
mod run;
mod verify;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "tmce", version, about = "Solve and check the translating mean curvature equation on catalog domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solvers and diagnostics of a config file.
    ///
    /// Exit status: 0 converged or classified, 2 inconclusive, 1 error.
    Solve { config: PathBuf },
    /// Run an invariant battery: functionals, perimeter, conformal, estimates or all.
    Verify { suite: String },
    /// Repeat a solve over values of h, T_max, alpha or domain_size.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { config } => run::cmd_solve(config),
        Command::Verify { suite } => verify::cmd_verify(suite),
        Command::Sweep { config, param, values } => run::cmd_sweep(config, param, values),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(run::EXIT_ERROR as u8)
        }
    }
}
