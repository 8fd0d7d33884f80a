use std::process::ExitCode;

use maserphase_cli::{emit, parse_config, run, CliError};

fn main() -> ExitCode {
    match parse_config(std::env::args_os()).and_then(|cfg| run(&cfg)).and_then(|t| emit(&t)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Display(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("maserphase: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
