use std::process::ExitCode;

use clap::Parser;
use dhj_cli::config::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dhj_cli::run(&cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(dhj_cli::exit_code(&err))
        }
    }
}
