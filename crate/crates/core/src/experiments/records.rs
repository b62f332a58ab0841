//! CSV schemas and the per-run metadata sidecar.
//!
//! CSV files carry only deterministic columns (and `elapsed_ns` /
//! `median_ns` / `iqr_ns`); wall clock and version live in the JSON sidecar
//! so re-runs compare byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const RUN_HEADER: &str = "k,f,grad_fro,grad_nuc,rank_used,residual,elapsed_ns";
pub const ROBUSTNESS_HEADER: &str = "n,sigma2,estimator,cov_trace";
pub const TIMING_HEADER: &str = "n,method,phase,median_ns,iqr_ns";

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub k: usize,
    pub f: f64,
    pub grad_fro: f64,
    pub grad_nuc: f64,
    /// Rank of the direction used by the step taken at `k`.
    pub rank_used: Option<usize>,
    pub residual: Option<f64>,
    /// Cumulative optimizer time through this row, metrics excluded.
    pub elapsed_ns: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunHeader {
    pub method: String,
    pub seed: u64,
    pub n: usize,
    pub config: Vec<(String, String)>,
    pub wall_clock_unix_s: u64,
    pub library_version: String,
    /// `"completed"` or `"diverged"`.
    pub status: String,
    /// First `k` whose iterate was not finite.
    pub diverged_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub header: RunHeader,
    pub rows: Vec<RunRow>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RunRecord {
    pub fn diverged(&self) -> bool {
        self.header.diverged_at.is_some()
    }

    pub fn last(&self) -> Option<&RunRow> {
        self.rows.last()
    }

    /// `grad_fro` at row `k`, or `+inf` if the run diverged before it.
    pub fn grad_fro_at(&self, k: usize) -> f64 {
        self.rows
            .iter()
            .find(|r| r.k == k)
            .map_or(f64::INFINITY, |r| r.grad_fro)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(RUN_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.k,
                r.f,
                r.grad_fro,
                r.grad_nuc,
                opt(r.rank_used),
                opt(r.residual),
                r.elapsed_ns
            );
        }
        out
    }

    /// The CSV with the timing column removed, for reproducibility checks.
    pub fn deterministic_csv(&self) -> String {
        strip_column(&self.to_csv(), "elapsed_ns")
    }

    pub fn header_json(&self) -> String {
        serde_json::to_string_pretty(&self.header).expect("header serializes")
    }

    pub fn write(&self, csv_path: &Path) -> Result<()> {
        write_text(csv_path, &self.to_csv())?;
        write_text(&csv_path.with_extension("meta.json"), &self.header_json())
    }
}

/// Parse a run CSV into rows. Empty optional cells become `None`.
pub fn parse_run_csv(text: &str) -> Result<Vec<RunRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RUN_HEADER => {}
        other => return Err(Error::Format(format!("unexpected run CSV header {other:?}"))),
    }
    lines
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 7 {
                return Err(Error::Format(format!("row {}: expected 7 cells", i + 1)));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Format(format!("row {}: bad number '{s}'", i + 1)))
            };
            Ok(RunRow {
                k: num(cells[0])? as usize,
                f: num(cells[1])?,
                grad_fro: num(cells[2])?,
                grad_nuc: num(cells[3])?,
                rank_used: if cells[4].is_empty() { None } else { Some(num(cells[4])? as usize) },
                residual: if cells[5].is_empty() { None } else { Some(num(cells[5])?) },
                elapsed_ns: cells[6]
                    .parse()
                    .map_err(|_| Error::Format(format!("row {}: bad elapsed_ns", i + 1)))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessRow {
    pub n: usize,
    pub sigma2: f64,
    pub estimator: String,
    pub cov_trace: f64,
}

pub fn robustness_csv(rows: &[RobustnessRow]) -> String {
    let mut out = format!("{ROBUSTNESS_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.n, r.sigma2, r.estimator, r.cov_trace);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub n: usize,
    pub method: String,
    /// `total`, or `qr` / `polar` / `other` for the sketch breakdown.
    pub phase: String,
    pub median_ns: f64,
    pub iqr_ns: f64,
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut out = format!("{TIMING_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.0},{:.0}",
            r.n, r.method, r.phase, r.median_ns, r.iqr_ns
        );
    }
    out
}

/// Drop a named column from a CSV document.
pub fn strip_column(csv: &str, column: &str) -> String {
    let mut lines = csv.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let Some(idx) = header.split(',').position(|c| c == column) else {
        return csv.to_string();
    };
    let keep = |line: &str| {
        line.split(',')
            .enumerate()
            .filter(|(i, _)| *i != idx)
            .map(|(_, c)| c)
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut out = keep(header);
    out.push('\n');
    for l in lines {
        out.push_str(&keep(l));
        out.push('\n');
    }
    out
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Median and interquartile range (linear interpolation between order
/// statistics).
pub fn median_iqr(samples: &[f64]) -> (f64, f64) {
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (s.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
    };
    (q(0.5), q(0.75) - q(0.25))
}
