//! `gsw`: sample Gram–Schmidt Walk designs and baselines, diagnose them, and
//! build confidence intervals from observed outcomes.
//!
//! Exit status: 0 on success, 2 for usage errors, 3 for data errors and 4
//! for numerical failures.

mod args;
mod commands;

use args::{Cli, Command};
use clap::Parser;
use gsw_core::io::DataError;
use std::process::ExitCode;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        let core = match cause.downcast_ref::<DataError>() {
            Some(DataError::Model(e)) => Some(e),
            Some(_) => return EXIT_DATA,
            None => cause.downcast_ref::<gsw_core::Error>(),
        };
        if let Some(e) = core {
            return match e {
                _ if e.is_numerical() => EXIT_NUMERICAL,
                gsw_core::Error::InvalidConfig(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_DATA
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample(a) => commands::sample(&a),
        Command::Diagnose(a) => commands::diagnose(&a),
        Command::Estimate(a) => commands::estimate(&a),
        Command::Oracle(a) => commands::oracle(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
