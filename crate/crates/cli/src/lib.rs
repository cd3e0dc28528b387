//! Command-line front end for the `externa` mechanism-design library.
//!
//! Exit codes: 0 when the run succeeded and the checked property holds, 1
//! when the run succeeded but an audit failed or no desirable mechanism
//! exists, 2 when the invocation or configuration could not be run.

mod args;
mod build;
mod config;
mod output;

use std::ffi::OsString;
use std::fmt;

use clap::Parser;

pub use args::{Cli, Command, Format};
pub use config::Config;

/// A problem with the invocation or configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<externa::Error> for UsageError {
    fn from(e: externa::Error) -> Self {
        UsageError(e.to_string())
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Parses `argv` and runs the command, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match output::dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
