use std::process::ExitCode;

use clap::Parser;
use dqest::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dqest: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
