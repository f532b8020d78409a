//! `dropcap`: command-line front end. Exit codes: 0 success, 1 numerical
//! failure, 2 invalid input, 3 solver non-convergence (best iterate written).

mod args;
mod run;

use std::fs::File;
use std::io::{self, Write};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};
use serde_json::json;

use args::{Cli, Format, OutputArgs};
use run::{Failure, Output};

/// Environment variable fixing the worker thread count.
const THREADS_VAR: &str = "DROPCAP_THREADS";

fn parse() -> Cli {
    let long: &'static str = Box::leak(
        format!(
            "{}\n{}",
            env!("CARGO_PKG_VERSION"),
            dropcap_core::CONVENTIONS
        )
        .into_boxed_str(),
    );
    let matches = Cli::command()
        .version(env!("CARGO_PKG_VERSION"))
        .long_version(long)
        .get_matches();
    Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit())
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or(format!(
        "{THREADS_VAR} must be a positive integer, got '{raw}'"
    ))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn emit(target: &OutputArgs, command: &str, out: &Output, converged: bool) -> io::Result<()> {
    let bytes = match target.format {
        Format::Csv => out.csv.clone(),
        Format::Json => {
            let mut config = out.config.clone();
            config["format"] = json!(target.format);
            config["output"] = json!(target.output);
            let doc = json!({
                "command": command,
                "version": env!("CARGO_PKG_VERSION"),
                "converged": converged,
                "config": config,
                "result": out.result,
            });
            let mut s = serde_json::to_string_pretty(&doc)?;
            s.push('\n');
            s.into_bytes()
        }
    };
    match &target.output {
        Some(path) => File::create(path)?.write_all(&bytes),
        None => io::stdout().lock().write_all(&bytes),
    }
}

fn main() -> ExitCode {
    let cli = parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let name = cli.command.name();
    let (code, written) = match run::execute(&cli.command) {
        Ok(out) => (0, emit(&cli.output, name, &out, true)),
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
        Err(Failure::NonConvergence { message, partial }) => {
            eprintln!("error: {message}; best iterate written");
            (3, emit(&cli.output, name, &partial, false))
        }
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
