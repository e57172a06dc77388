//! Command line driver: profile tables, answer single questions, run
//! benchmark manifests, perturb tables, and inspect replay traces.

mod backend;
mod commands;
mod config;
mod convert;
mod error;

use clap::{Parser, Subcommand};

use commands::{AskArgs, AugmentArgs, BenchArgs, PerturbArgs, TraceArgs};
use convert::ConvertArgs;

#[derive(Parser)]
#[command(
    name = "tabqa",
    version,
    about = "Question answering over large tables through sampled sub-tables and SQL"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Profile a table and store its augmentation for later runs.
    Augment(AugmentArgs),
    /// Answer a single question over one table.
    Ask(AskArgs),
    /// Evaluate a manifest of examples and write a report.
    Bench(BenchArgs),
    /// Append seeded noise rows to a table.
    Perturb(PerturbArgs),
    /// Inspect recorded gateway traces.
    Trace(TraceArgs),
    /// Convert benchmark datasets from their native layouts.
    Convert(ConvertArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Augment(args) => commands::cmd_augment(&args),
        Command::Ask(args) => commands::cmd_ask(&args),
        Command::Bench(args) => commands::cmd_bench(&args),
        Command::Perturb(args) => commands::cmd_perturb(&args),
        Command::Trace(args) => commands::cmd_trace(&args),
        Command::Convert(args) => convert::cmd_convert(&args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.code());
    }
}
