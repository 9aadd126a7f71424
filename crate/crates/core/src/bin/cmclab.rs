use std::process::ExitCode;

use clap::Parser;
use cmclab::cli::{configure_threads, exit_code, print_report, run, Cli, Command, THREADS_ENV};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match &cli.command {
        Command::Simulate(a) => Some(a.out.clone()),
        Command::Field(a) => a.out.clone(),
        Command::Diagnose(a) => a.out.clone(),
        Command::Oracle(a) => a.out.clone(),
    };
    let result = configure_threads(std::env::var(THREADS_ENV).ok().as_deref())
        .and_then(|()| run(cli))
        .and_then(|o| print_report(&o, out.as_deref()).map(|()| o));
    match result {
        Ok(o) if o.pass => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("cmclab: checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("cmclab: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
