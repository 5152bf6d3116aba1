//! `ementa` command-line entry point.
//!
//! Every subcommand reads its inputs and writes its outputs only through
//! paths given as settings. Progress goes to standard error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ConfigFile;

#[derive(Parser)]
#[command(name = "ementa", version, about = "Multi-label categorization of case-law summaries")]
struct Cli {
    /// TOML file with one table per subcommand, e.g. `[adjust]`
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus
    Synth(commands::SynthArgs),
    /// Clean a raw JSON Lines corpus
    Ingest(commands::IngestArgs),
    /// Profile a corpus
    Stats(commands::StatsArgs),
    /// Refine descriptor terms into a label space and emit a labeled dataset
    Adjust(commands::AdjustArgs),
    /// Split a labeled dataset into train, validation and test
    Split(commands::SplitArgs),
    /// Train and evaluate one model
    Train(commands::TrainArgs),
    /// Run a hyperparameter grid, resuming from earlier results
    Grid(commands::GridArgs),
    /// Fit and evaluate the most-frequent-labels baseline
    Baseline(commands::BaselineArgs),
    /// Write the result tables
    Report(commands::ReportArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(a) => commands::synth(file.layer("synth", a)?),
        Command::Ingest(a) => commands::ingest(file.layer("ingest", a)?),
        Command::Stats(a) => commands::stats(file.layer("stats", a)?),
        Command::Adjust(a) => commands::adjust(file.layer("adjust", a)?),
        Command::Split(a) => commands::split(file.layer("split", a)?),
        Command::Train(a) => commands::train(file.layer("train", a)?),
        Command::Grid(a) => commands::grid(file.layer("grid", a)?),
        Command::Baseline(a) => commands::baseline(file.layer("baseline", a)?),
        Command::Report(a) => commands::report(file.layer("report", a)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}

/// The error chain joined on one line, skipping causes already spelled out
/// by the message that wraps them.
fn one_line(e: &anyhow::Error) -> String {
    let mut line = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if line.contains(&text) {
            continue;
        }
        if !line.is_empty() {
            line.push_str(": ");
        }
        line.push_str(&text);
    }
    line.replace('\n', " ")
}
