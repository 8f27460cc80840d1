//! `rbwe`: reproducible experiments for the offline-RL bandwidth estimator.

mod commands;
mod error;
mod files;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{dump_gmm, eval_offline, generate, report, rerun, simulate, traces, train};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "rbwe", version, about = "Offline-RL bandwidth estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize capacity traces as trace JSON files.
    Traces(traces::Args),
    /// Log behavior-policy sessions over traces into a transitions file.
    Generate(generate::Args),
    /// Train the policy and critic on a transitions file.
    Train(train::Args),
    /// Replay logged states through a model (or the logged behavior).
    EvalOffline(eval_offline::Args),
    /// Run closed-loop sessions with a rate controller.
    Simulate(simulate::Args),
    /// Aggregate session scores into report, summary and CDF tables.
    Report(report::Args),
    /// Print the mixture, mode and gate quantities for one logged state.
    DumpGmm(dump_gmm::Args),
    /// Re-run a command from its manifest and compare output hashes.
    Rerun(rerun::Args),
}

fn parse(argv: &[String]) -> Result<Cli, clap::Error> {
    Cli::try_parse_from(std::iter::once("rbwe".to_owned()).chain(argv.iter().cloned()))
}

/// Parses `argv` (without the program name) and runs the command.
pub(crate) fn run(argv: &[String]) -> CliResult<()> {
    let cli = parse(argv).map_err(|e| CliError::Usage(e.to_string()))?;
    execute(cli.command, argv)
}

fn execute(command: Command, argv: &[String]) -> CliResult<()> {
    match command {
        Command::Traces(a) => traces::run(a, argv),
        Command::Generate(a) => generate::run(a, argv),
        Command::Train(a) => train::run(a, argv),
        Command::EvalOffline(a) => eval_offline::run(a, argv),
        Command::Simulate(a) => simulate::run(a, argv),
        Command::Report(a) => report::run(a, argv),
        Command::DumpGmm(a) => dump_gmm::run(a),
        Command::Rerun(a) => rerun::run(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    // Help, version and flag errors are reported by clap (exit code 2 for errors).
    let cli = parse(&argv).unwrap_or_else(|e| e.exit());
    match execute(cli.command, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
