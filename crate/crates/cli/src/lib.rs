//! Command-line front end: curve files, run manifests, SVG frames and CSV
//! traces around the `finsler_core` descent.

pub mod args;
pub mod commands;
pub mod curve_file;
pub mod error;
pub mod manifest;
pub mod svg;
pub mod trace;

use clap::Parser;

use args::{build_manifest, configure_threads, Cli, Sub};
use error::CliError;
use manifest::Command;

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { error::EXIT_INPUT } else { 0 };
        }
    };
    match run_cli(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn run_cli(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let manifest = match cli.command {
        Sub::Match { source, target, opts } => build_manifest(Command::Match, source, target, &opts)?,
        Sub::Flow { source, opts } => build_manifest(Command::Flow, source, None, &opts)?,
        Sub::Gradient { source, target, opts } => build_manifest(Command::Gradient, source, target, &opts)?,
    };
    commands::run(&manifest)
}
