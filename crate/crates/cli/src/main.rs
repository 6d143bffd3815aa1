use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod error;
mod gen;
mod params;
mod run;

use error::CliError;

/// Single-pass stream clustering over a decayed count-min sketch and
/// partitioned bloom filters.
#[derive(Debug, Parser)]
#[command(name = "bloomstream", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derive and report sketch and filter parameters.
    Params(params::ParamsArgs),
    /// Write a synthetic labeled stream as CSV.
    Gen(gen::GenArgs),
    /// Cluster a CSV stream and emit assignments and per-window metrics.
    Run(run::RunArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(CliError::USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let res = match cli.command {
        Command::Params(args) => params::cmd_params(&args),
        Command::Gen(args) => gen::cmd_gen(&args),
        Command::Run(args) => run::cmd_run(&args),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bloomstream: {e}");
            ExitCode::from(e.code())
        }
    }
}
