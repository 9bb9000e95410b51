mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use sphereloc::Error;

use args::{Cli, Command};

const EXIT_USAGE: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Contract(_) => EXIT_INTERNAL,
        _ => EXIT_USAGE,
    }
}

/// Caps rayon's global pool when SPHERELOC_THREADS is set.
fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SPHERELOC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("SPHERELOC_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    // an escaped panic is an internal invariant violation, not bad input
    let default_hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(move |info| {
        default_hook(info);
        std::process::exit(EXIT_INTERNAL as i32);
    }));

    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Render(a) => commands::render(a),
        Command::Orient(a) => commands::orient(a),
        Command::Localize(a) => commands::localize(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::Retrieval(a) => commands::retrieval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
