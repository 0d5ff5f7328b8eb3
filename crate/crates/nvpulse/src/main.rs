use std::process::ExitCode;

use clap::Parser;

use nvpulse::cli::{execute, Cli};

fn main() -> ExitCode {
    let outcome = execute(&Cli::parse());
    print!("{}", outcome.stdout);
    eprint!("{}", outcome.stderr);
    ExitCode::from(outcome.code)
}
