mod commands;
mod config;
mod format;

use std::process::ExitCode;

use clap::Parser;
use qwres::Error;

use config::{Cli, Command, RunConfig};

fn configure_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var("QW_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Input(format!("QW_THREADS={v} is not a count")))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::Input(e.to_string()))?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Error> {
    configure_threads()?;
    match cli.command {
        Command::Resonances(args) => commands::resonances(&RunConfig::new(&args, "0.25")?).map(|_| true),
        Command::Transmission { graph, grid, inflow } => {
            commands::transmission_cmd(&RunConfig::new(&graph, "0.25")?, grid, inflow).map(|_| true)
        }
        Command::Perturb(args) => commands::perturb(&RunConfig::new(&args, "0.02,0.01,0.005")?).map(|_| true),
        Command::Verify(args) => commands::verify_cmd(&args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
