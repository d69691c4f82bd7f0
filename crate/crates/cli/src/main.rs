use std::process::ExitCode;

use clap::Parser;
use pricecast_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pricecast: {e}");
            ExitCode::from(e.code())
        }
    }
}
