//! Benchmark front end: generate instances, estimate reference optima, run
//! single solves and multi-seed races, and reproduce the standard experiment
//! sweeps. Exit codes: 0 success, 1 validation failure, 2 numeric abort.

mod commands;

use clap::error::ErrorKind;
use clap::Parser;

fn main() {
    let cli = match commands::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit();
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    match commands::run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if e
                .downcast_ref::<ardca_core::SolverError>()
                .map(|se| matches!(se, ardca_core::SolverError::Numeric { .. }))
                .unwrap_or(false)
            {
                2
            } else {
                1
            };
            std::process::exit(code);
        }
    }
}
