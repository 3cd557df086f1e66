//! Binary entry point. Exit codes: 0 success, 2 refutation (an identified
//! set came back empty, a substantive finding), 1 any error. Argument
//! errors exit 1 so scripts can tell them apart from refutations.

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use bidbounds_cli::args::Cli;
use bidbounds_cli::commands::{run, Outcome};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Refuted(message)) => {
            println!("refuted: {message}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
