use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use entbound_cli::{run, Cli, CliError};

fn write(path: &std::path::Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|outcome| {
        for (path, text) in &outcome.files {
            write(path, text)?;
        }
        match &cli.global.out {
            Some(path) => write(path, &outcome.report)?,
            None => {
                let _ = std::io::stdout().write_all(outcome.report.as_bytes());
            }
        }
        Ok(outcome.exit_code)
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
