use clap::Parser;
use mems_cli::{configure_threads, run, Cli, RunConfig, RunError};
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = configure_threads().map_err(RunError::from).and_then(|_| RunConfig::from_cli(&cli).map_err(RunError::from)).and_then(|cfg| run(&cfg));
    match res {
        Ok((_, summary)) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("mems: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
