//! `anncur`: estimator evaluation, simulated annotation runs, curriculum
//! export, study analysis and the study service, one subcommand each.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.

mod args;
mod commands;
mod config;
mod error;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;
pub use error::CliError;

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run(argv: Vec<OsString>) -> i32 {
    let argv = match config::expand(argv) {
        Ok(a) => a,
        Err(e) => return report(e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}
