use std::process::ExitCode;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use taskguide::cli::{run, serve, Cli, Command};

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve { config } => tokio::runtime::Runtime::new()
            .map_err(|e| taskguide::cli::CliError::Failed(e.to_string()))
            .and_then(|rt| rt.block_on(serve(&config)).map(|_| 0)),
        other => run(other, &mut std::io::stdout().lock()),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
