//! Benchmark harness: configuration, the four studies, and their outputs.

pub mod config;
pub mod invariants;
pub mod plot;
pub mod records;
pub mod regression;
pub mod robustness;
pub mod timing;

pub use config::{Experiment, Method, RankMode, ResidualChoice, RunConfig, OUTPUT_DIR_ENV};
pub use invariants::{run_invariants, InvariantReport, PropertyResult};
pub use records::{RunHeader, RunRecord, RunRow};
pub use regression::{run_regression, RegressionOutput, RegressionRun};
pub use robustness::run_robustness;
pub use timing::run_timing;

use crate::error::{Error, Result};

/// Exit status for the `bench` binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    PropertyFailure = 1,
    ConfigError = 2,
}

/// Run `cfg.experiment`, returning the text to print on stdout.
pub fn run(cfg: &RunConfig) -> Result<(String, ExitStatus)> {
    cfg.validate()?;
    Ok(match cfg.experiment {
        Experiment::Timing => (run_timing(cfg)?, ExitStatus::Ok),
        Experiment::Robustness => (run_robustness(cfg)?, ExitStatus::Ok),
        Experiment::Regression => {
            let out = run_regression(cfg)?;
            let mut text = String::new();
            for run in &out.runs {
                let last = run.record.last();
                text.push_str(&format!(
                    "n={} seed={} method={} status={} f={:.6e} grad_fro={:.6e}\n",
                    run.n,
                    run.seed,
                    run.method,
                    run.record.header.status,
                    last.map_or(f64::NAN, |r| r.f),
                    last.map_or(f64::NAN, |r| r.grad_fro),
                ));
            }
            for f in &out.files {
                text.push_str(&format!("wrote {}\n", f.display()));
            }
            (text, ExitStatus::Ok)
        }
        Experiment::Invariants => {
            let report = run_invariants(cfg)?;
            let status = if report.all_pass() {
                ExitStatus::Ok
            } else {
                ExitStatus::PropertyFailure
            };
            (report.to_json_lines(), status)
        }
    })
}

/// Map a failure to the exit code reported by `bench`.
pub fn exit_status_for(err: &Error) -> ExitStatus {
    let _ = err;
    ExitStatus::ConfigError
}
