use std::io::Write;
use std::process::ExitCode;

use lowrank_core::experiments::{self, RunConfig, OUTPUT_DIR_ENV};

const USAGE: &str = "usage: bench <timing|robustness|regression|invariants> [--config FILE] [--key value ...]";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" {
        eprintln!("{USAGE}");
        return ExitCode::from(if args.is_empty() { 2 } else { 0 });
    }
    let cfg = match RunConfig::from_args(&args, std::env::var(OUTPUT_DIR_ENV).ok()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("bench: {e}\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    match experiments::run(&cfg) {
        Ok((text, status)) => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            ExitCode::from(status as u8)
        }
        Err(e) => {
            eprintln!("bench: {e}");
            ExitCode::from(experiments::exit_status_for(&e) as u8)
        }
    }
}
