//! `pvi` — command-line front end for the variational integrator toolkit.
//!
//! Exit codes: 0 success, 1 configuration error, 2 partial run (an artifact
//! with the completed prefix was still written), 3 invariant failure.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};

use config::CommonArgs;

#[derive(Parser)]
#[command(name = "pvi", version, about = "Variational integrators for perturbed non-canonical Hamiltonian systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a trajectory and write it as CSV.
    Integrate(CommonArgs),
    /// Iterate the time-tau return map over a seed grid (concurrently)
    /// and write polar sections as CSV.
    Poincare(CommonArgs),
    /// Sweep epsilon, measure one-step error against the reference
    /// integrator and write a JSON convergence report.
    Converge(CommonArgs),
    /// Run the invariant battery (flow group law, pairing identities,
    /// gradient cross-checks, two-form transport, energy) and write a
    /// JSON report.
    Check(CommonArgs),
    /// Print the built-in system names.
    ListSystems,
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Integrate(args) => commands::integrate(args),
        Command::Poincare(args) => commands::poincare(args),
        Command::Converge(args) => commands::converge(args),
        Command::Check(args) => commands::check(args),
        Command::ListSystems => commands::list_systems(),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
    }
}
