mod args;
mod commands;
mod manifest;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use args::{Cli, Command};

/// Exit code 1: the inputs were read but are invalid or a check failed.
/// Exit code 2: bad usage or an unreadable/unwritable file.
#[derive(Debug)]
pub enum Failure {
    Invalid(anyhow::Error),
    Usage(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Usage(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(e) | Failure::Usage(e) => write!(f, "{e:#}"),
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

pub trait Classify<T> {
    fn usage(self, context: impl fmt::Display) -> CmdResult<T>;
    fn invalid(self, context: impl fmt::Display) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self, context: impl fmt::Display) -> CmdResult<T> {
        self.map_err(|e| Failure::Usage(e.into().context(context.to_string())))
    }

    fn invalid(self, context: impl fmt::Display) -> CmdResult<T> {
        self.map_err(|e| Failure::Invalid(e.into().context(context.to_string())))
    }
}

pub fn usage_error(msg: impl fmt::Display) -> Failure {
    Failure::Usage(anyhow::anyhow!("{msg}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default = if cli.verbose { "debug" } else { "warn" };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default)))
        .with_writer(std::io::stderr)
        .init();

    let result = match cli.command {
        Command::Retrieve(a) => commands::retrieve(a),
        Command::EvalRetrieval(a) => commands::eval_retrieval(a),
        Command::Refine(a) => commands::refine(a),
        Command::EvalParse(a) => commands::eval_parse(a),
        Command::Adjudicate(a) => commands::adjudicate(a),
        Command::Serve(a) => commands::serve(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
