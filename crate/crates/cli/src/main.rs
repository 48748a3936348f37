mod args;
mod offline;
mod remote;

use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Failure with the exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Timeout(String),
    Server(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Timeout(_) => 3,
            CliError::Server(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Timeout(m) | CliError::Server(m) => f.write_str(m),
        }
    }
}

pub type CliResult = Result<(), CliError>;

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Serve(a) => remote::serve(a),
        Command::Check(a) => offline::check(a),
        Command::Query(a) => offline::query(a),
        Command::Dump(a) => offline::dump(a),
        Command::Request(a) => remote::request(a),
        Command::Confirm(a) => remote::confirm(a),
        Command::Delete(a) => remote::delete(a),
        Command::Renew(a) => remote::renew(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Server(m)) => {
            println!("ERROR: {m}");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("dynacl: {e}");
            ExitCode::from(e.code())
        }
    }
}
