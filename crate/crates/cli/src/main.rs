//! `verbatim`: build corpus indexes, collect generations, measure verbatim
//! reproduction and summarize it.
//!
//! Exit codes: 0 success, 1 usage, 2 input error, 3 completed with record
//! errors, 4 nothing analyzed.

mod analyze;
mod generate;
mod index;
mod report;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_RECORD_ERRORS: u8 = 3;
pub const EXIT_NOTHING_ANALYZED: u8 = 4;

/// A command failure with the exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

/// Failure caused by unreadable or invalid input.
pub fn input(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        error: error.into(),
    }
}

pub type CmdResult = Result<u8, Failure>;

#[derive(Parser)]
#[command(name = "verbatim", version, about = "Measure verbatim reproduction of a reference corpus in generated text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or check a corpus index.
    #[command(subcommand)]
    Index(index::IndexCommand),
    /// Collect generations from a chat-completion endpoint.
    Generate(Box<generate::GenerateArgs>),
    /// Measure reproduction for every record against an index.
    Analyze(analyze::AnalyzeArgs),
    /// Aggregate analyzed records into summary tables and curves.
    Report(report::ReportArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Index(cmd) => index::run(cmd),
        Command::Generate(args) => generate::run(*args),
        Command::Analyze(args) => analyze::run(args),
        Command::Report(args) => report::run(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
