use std::process::ExitCode;

use clap::Parser;
use gossipsim::cli::{self, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    cli::main_with(Cli::parse())
}
