mod args;
mod commands;
mod error;
mod plot;
mod report;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;

fn configure_threads() {
    if let Some(n) = std::env::var("GERMFLOW_THREADS").ok().and_then(|s| s.parse::<usize>().ok()).filter(|&n| n > 0) {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    configure_threads();
    let out = cli.command.args().out.clone();
    match commands::run(&cli.command).and_then(|r| r.write(out.as_deref()).map(|()| r)) {
        Ok(report) if report.all_hold() => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("germflow: {e}");
            ExitCode::from(2)
        }
    }
}
