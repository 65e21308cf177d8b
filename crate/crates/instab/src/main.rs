use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    instab::cli::run(instab::cli::Cli::parse())
}
