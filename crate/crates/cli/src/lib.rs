//! The `oodkit` command line: fit, score, eval, diagnose, sweep and synth.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

pub mod args;
pub mod commands;
pub mod config;
pub mod method;
pub mod pipeline;

use std::ffi::OsString;

use clap::error::ErrorKind as ClapErrorKind;
use clap::Parser;

use oodkit_core::{Error, ErrorKind};

use crate::args::{Cli, Command};
use crate::config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Usage => EXIT_USAGE,
        ErrorKind::Data => EXIT_DATA,
        ErrorKind::Numerical => EXIT_NUMERICAL,
    }
}

/// Caps the global thread pool from `OODKIT_THREADS`.
fn configure_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var("OODKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("OODKIT_THREADS must be a positive integer, got {value:?}")))?;
    // a pool that already exists (a second call in one process) is kept
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ClapErrorKind::DisplayHelp
                | ClapErrorKind::DisplayVersion
                | ClapErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match configure_threads().and_then(|()| dispatch(&cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("oodkit: error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: &Command) -> Result<(), Error> {
    use crate::commands as cmd;
    if let Command::Synth(a) = command {
        let config = RunConfig::from_command(command, &a.seeds);
        return cmd::synth(a, &config).map(drop);
    }
    let common = match command {
        Command::Fit(a) => &a.common,
        Command::Score(a) => &a.common,
        Command::Eval(a) => &a.common,
        Command::Diagnose(a) => &a.common,
        Command::Sweep(a) => &a.common,
        Command::Synth(_) => unreachable!("handled above"),
    };
    let (m, seeds) = cmd::resolve(common)?;
    let config = RunConfig::from_command(command, &seeds);
    match command {
        Command::Fit(a) => cmd::fit(a, &config, &m, &seeds),
        Command::Score(a) => cmd::score(a, &config, &m, &seeds),
        Command::Eval(a) => cmd::eval(a, &config, &m, &seeds).map(drop),
        Command::Diagnose(a) => cmd::diagnose(a, &config, &m, &seeds),
        Command::Sweep(a) => cmd::sweep(a, &config, &m, &seeds).map(drop),
        Command::Synth(_) => unreachable!("handled above"),
    }
}
