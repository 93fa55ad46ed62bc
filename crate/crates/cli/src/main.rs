use std::process::ExitCode;

use clap::Parser;
use relaysim_cli::{main_with, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_with(&cli) {
        Ok(done) => {
            print!("{}", done.report);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
