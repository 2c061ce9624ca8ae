//! `quartz`: command-line front end for the equilibrium, asymptotic and
//! dynamics analyses of `quartz-equilibria`.

mod args;
mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::error::EXIT_FAILURE;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match commands::run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILURE),
        Err(e) => {
            let doc = output::fixed_precision(e.diagnostic());
            eprintln!("{}", serde_json::to_string_pretty(&doc).unwrap_or_else(|_| e.to_string()));
            ExitCode::from(e.exit_code())
        }
    }
}
