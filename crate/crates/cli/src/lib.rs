//! Command-line front end for [`quasigrad`].
//!
//! Exit codes: 0 success or stationary, 1 input error, 2 non-termination,
//! 3 not stationary.

mod args;
mod estimate;
mod input;
mod json;
mod landscape;
mod report;
mod simulate;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::Parser;

pub use args::{Cli, Command, EstimateArgs, LandscapeArgs, SimulateArgs};
pub use input::{read_csv, write_csv};
pub use json::to_json_string;
pub use report::{LandscapeDocument, Metrics, ReportDocument, ResultSection, TraceSummary};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_NON_TERMINATION: u8 = 2;
pub const EXIT_NOT_STATIONARY: u8 = 3;

/// An error message and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub(crate) fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub(crate) fn missing(flag: &str, why: &str) -> Self {
        Self::input(format!("missing {flag}: {why}"))
    }
}

impl From<quasigrad::Error> for Failure {
    fn from(e: quasigrad::Error) -> Self {
        use quasigrad::Error;
        let code = match e {
            Error::NonTermination { .. } | Error::StalledGradient { .. } | Error::Collapsed => {
                EXIT_NON_TERMINATION
            }
            _ => EXIT_INPUT,
        };
        let message = match &e {
            Error::Parameter { name, reason } => {
                format!("invalid --{}: {reason}", name.replace('_', "-"))
            }
            _ => e.to_string(),
        };
        Self { code, message }
    }
}

/// Parses `args`, runs the subcommand, and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let result = match &cli.command {
        Command::Estimate(a) => estimate::run(a, stdout),
        Command::Simulate(a) => simulate::run(a, stdout),
        Command::Landscape(a) => landscape::run(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

/// Writes `text` to `path`, or to `stdout` when no path is given.
pub(crate) fn emit(text: &str, path: Option<&Path>, stdout: &mut dyn Write) -> Result<(), Failure> {
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Failure::input(format!("{}: {e}", p.display())))
        }
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::input(format!("stdout: {e}"))),
    }
}

pub(crate) fn json_text<T: serde::Serialize>(value: &T) -> String {
    to_json_string(value).expect("documents serialize")
}

/// The seed from the flag or config, else `QUASIGRAD_SEED`, else 0.
pub(crate) fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.or_else(quasigrad::solvers::env_seed).unwrap_or(0)
}
