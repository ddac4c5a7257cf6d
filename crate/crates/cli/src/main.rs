use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use ratecode_cli::args::Cli;
use ratecode_cli::{configure_threads, run_and_write, CliError};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => return fail(&CliError::Usage(e.to_string().trim().to_string())),
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    let object = serde_json::to_string(&e.to_object()).expect("error objects serialize");
    eprintln!("{object}");
    ExitCode::FAILURE
}

fn execute(cli: Cli) -> Result<(), CliError> {
    configure_threads(std::env::var("RATECODE_THREADS").ok().as_deref())?;
    let config = cli.command.into_config()?;
    let report = run_and_write(&config)?;
    if config.output.is_none() {
        let text = serde_json::to_string_pretty(&report).expect("reports serialize") + "\n";
        match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                return Err(CliError::io(Path::new("<stdout>"), e));
            }
            _ => {}
        }
    }
    Ok(())
}
