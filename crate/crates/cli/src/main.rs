//! `porss` — partial-order ranked set sampling from the command line.
//!
//! Subcommands:
//! * `linext`   — count, enumerate, sample and summarize linear extensions of
//!   the dominance poset of a CSV of element vectors.
//! * `simulate` — run a seeded Monte Carlo efficiency study from a JSON plan.
//! * `estimate` — one full design pass over an empirical CSV population.
//! * `validate` — schema-check a CSV dataset, reporting every problem.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 data error.

mod cmd_estimate;
mod cmd_linext;
mod cmd_simulate;
mod cmd_validate;
mod common;

use clap::{Parser, Subcommand};

use common::CliError;

#[derive(Parser)]
#[command(
    name = "porss",
    version,
    about = "Ranked set sampling for multiple variables via partial orders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Linear-extension tools over a poset built from a CSV of element vectors
    Linext(cmd_linext::LinextArgs),
    /// Run a Monte Carlo efficiency study from a JSON plan (or plan list)
    Simulate(cmd_simulate::SimulateArgs),
    /// One design pass over an empirical CSV population
    Estimate(cmd_estimate::EstimateArgs),
    /// Validate a CSV dataset against declared column roles
    Validate(cmd_validate::ValidateArgs),
}

fn main() {
    // Die quietly when a consumer like `head` closes the pipe instead of
    // panicking on the next print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version are not errors.
            if matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                print!("{err}");
                std::process::exit(0);
            }
            eprint!("{err}");
            std::process::exit(1);
        }
    };
    let outcome = match cli.command {
        Command::Linext(args) => cmd_linext::run(args),
        Command::Simulate(args) => cmd_simulate::run(args),
        Command::Estimate(args) => cmd_estimate::run(args),
        Command::Validate(args) => cmd_validate::run(args),
    };
    match outcome {
        Ok(()) => {}
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
    }
}
