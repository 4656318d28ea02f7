//! Command-line front end.
//!
//! Exit codes: 0 success, 1 internal or numerical failure, 2 malformed CSV,
//! 3 invalid configuration, 4 model space above the cap without `--search`.
//! The worker pool size is read from `NONLOCAL_THREADS` (default: one thread
//! per logical CPU).

mod args;
mod commands;
mod error;
mod output;
mod settings;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.to_string();
            let line = rendered
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("nonlocal: invalid configuration: {line}");
            return ExitCode::from(3);
        }
    };
    let threads = nonlocal::exec::init_thread_pool_from_env();
    let result = match &cli.command {
        Command::Fit(a) => commands::fit::run(a, threads),
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Density(a) => commands::density::run(a),
        Command::Study(a) => commands::study::run(a, threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("nonlocal: {}", f.to_string().replace('\n', " "));
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
