use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match recal::cli::run(recal::cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
