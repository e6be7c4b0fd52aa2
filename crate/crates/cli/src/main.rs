use std::process::ExitCode;

use clap::Parser;
use subci_cli::commands::{run, write_output};
use subci_cli::config::{Cli, RunConfig};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = RunConfig::from_cli(&cli).and_then(|config| {
        let output = run(&config)?;
        write_output(&output)?;
        Ok(output.ok)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
