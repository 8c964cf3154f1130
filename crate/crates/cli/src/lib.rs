//! Front end for the `pgso` binary: argument grammar, pipelines, CSV and
//! manifest emission. [`run_args`] runs one command line in-process.

pub mod cli;
pub mod commands;
pub mod manifest;
pub mod output;

use clap::Parser;
use std::sync::atomic::{AtomicBool, Ordering};

static QUIET: AtomicBool = AtomicBool::new(false);

/// Prints a summary line unless `--quiet` is set.
pub(crate) fn say(line: impl std::fmt::Display) {
    if !QUIET.load(Ordering::Relaxed) {
        println!("{line}");
    }
}

pub(crate) fn first_line(msg: &str) -> String {
    let line = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    line.trim_start_matches("error: ").trim().to_string()
}

/// Runs a parsed command line, inside a pool of `--threads` workers when given.
pub fn run(cli: cli::Cli) -> anyhow::Result<()> {
    QUIET.store(cli.quiet, Ordering::Relaxed);
    match cli.threads {
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
            .map_err(|e| anyhow::anyhow!("--threads: {e}"))?
            .install(|| commands::dispatch(cli.command)),
        // Without the parallel feature everything runs on one thread.
        _ => commands::dispatch(cli.command),
    }
}

/// Parses and runs `argv` (including the program name).
pub fn run_args<I, T>(argv: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = cli::Cli::try_parse_from(argv).map_err(|e| anyhow::anyhow!("usage error: {}", first_line(&e.to_string())))?;
    run(cli)
}
