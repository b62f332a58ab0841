//! Wall-clock comparison of orthogonalization methods on square Gaussian
//! matrices.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::experiments::config::{Method, RunConfig};
use crate::experiments::records::{median_iqr, timing_csv, write_text, TimingRow};
use crate::linalg::{self, Matrix, PolarConfig};
use crate::orthogonalize::{sketch_sign, SketchSpec};
use crate::{seeded_rng, Rng};

/// Time spent in each stage of a Gaussian sketch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SketchPhases {
    pub qr: Duration,
    pub polar: Duration,
    pub other: Duration,
}

impl SketchPhases {
    pub fn total(&self) -> Duration {
        self.qr + self.polar + self.other
    }
}

/// Gaussian sketch with per-stage timing. Performs the same operations in
/// the same order as `sketch_sign_gaussian` followed by `materialize`.
pub fn gaussian_sketch_phased(
    m: &Matrix,
    rank: usize,
    polar: &PolarConfig,
    rng: &mut Rng,
) -> Result<(Matrix, SketchPhases)> {
    let mut phases = SketchPhases::default();
    let t = Instant::now();
    let g = linalg::gaussian_matrix(m.ncols(), rank, rng);
    let y = m * g;
    phases.other += t.elapsed();

    let t = Instant::now();
    let q = linalg::qr_thin(&y)?.q;
    phases.qr += t.elapsed();

    let t = Instant::now();
    let b = linalg::t_mul(&q, m);
    phases.other += t.elapsed();

    let t = Instant::now();
    let s = linalg::polar_sign(&b, polar)?;
    phases.polar += t.elapsed();

    let t = Instant::now();
    let out = &q * &s;
    phases.other += t.elapsed();
    Ok((out, phases))
}

/// Sketch spec used for `method` in the timing study. `truncated-svd` is the
/// randomized truncated SVD: a power-iterated range with an exact SVD of the
/// projected matrix, which gives `U_r V_r^T` of the rank-`r` approximation.
pub fn sketch_spec_for(method: Method, rank: usize, cfg: &RunConfig) -> Option<SketchSpec> {
    let ns = cfg.ns_config();
    let spec = match method {
        Method::GaussianSketch => SketchSpec::gaussian(rank).with_polar(ns),
        Method::ColumnSelect => SketchSpec::column_select(rank).with_polar(ns),
        Method::PowerIteration => SketchSpec::power(rank, cfg.power_q).with_polar(ns),
        Method::TruncatedSvd => SketchSpec::power(rank, cfg.power_q).with_polar(PolarConfig::exact()),
        _ => return None,
    };
    Some(spec.with_residual(None))
}

/// Matrix-sign estimate of `m` by `method`, materialized as a full matrix.
pub fn orthogonalize(method: Method, m: &Matrix, cfg: &RunConfig, rng: &mut Rng) -> Result<Matrix> {
    match method {
        Method::ExactSvd => linalg::msgn_exact(m),
        Method::NewtonSchulz => linalg::newton_schulz(m, &cfg.ns_config()),
        _ => {
            let rank = cfg.rank_for(linalg::min_dim(m));
            let spec = sketch_spec_for(method, rank, cfg)
                .ok_or_else(|| Error::Config(format!("'{method}' is not an orthogonalization method")))?;
            Ok(sketch_sign(m, &spec, rng)?.materialize())
        }
    }
}

pub fn time_once(method: Method, m: &Matrix, cfg: &RunConfig, rng: &mut Rng) -> Result<Duration> {
    let t = Instant::now();
    let out = orthogonalize(method, m, cfg, rng)?;
    let elapsed = t.elapsed();
    std::hint::black_box(out);
    Ok(elapsed)
}

fn cell_seed(seed: u64, n: usize, rep: usize, salt: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (n as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ (rep as u64).wrapping_mul(0x94D0_49BB_1331_11EB)
        ^ salt
}

/// Run the timing study and return its rows, sorted by `(n, method, phase)`.
pub fn timing_rows(cfg: &RunConfig) -> Result<Vec<TimingRow>> {
    let dims = cfg.dims();
    if dims.is_empty() {
        return Err(Error::Config("dims must be nonempty".into()));
    }
    let methods = cfg.methods();
    if let Some(m) = methods.iter().find(|m| !m.is_orthogonalizer()) {
        return Err(Error::Config(format!("'{m}' is not an orthogonalization method")));
    }
    let seed = cfg.seeds.first().copied().unwrap_or(0);
    let ns = cfg.ns_config();
    let mut rows = Vec::new();
    for &n in &dims {
        let mut totals: Vec<Vec<f64>> = vec![Vec::new(); methods.len()];
        let mut phases: Vec<SketchPhases> = Vec::new();
        for rep in 0..cfg.warmup + cfg.reps {
            let m = linalg::gaussian_matrix(n, n, &mut seeded_rng(cell_seed(seed, n, rep, 0)));
            for (i, &method) in methods.iter().enumerate() {
                let mut rng = seeded_rng(cell_seed(seed, n, rep, 1 + i as u64));
                let (elapsed, split) = if method == Method::GaussianSketch {
                    let (out, split) = gaussian_sketch_phased(&m, cfg.rank_for(n), &ns, &mut rng)?;
                    std::hint::black_box(out);
                    (split.total(), Some(split))
                } else {
                    (time_once(method, &m, cfg, &mut rng)?, None)
                };
                if rep >= cfg.warmup {
                    totals[i].push(elapsed.as_nanos() as f64);
                    if let Some(s) = split {
                        phases.push(s);
                    }
                }
            }
        }
        for (i, &method) in methods.iter().enumerate() {
            let (median, iqr) = median_iqr(&totals[i]);
            rows.push(TimingRow {
                n,
                method: method.name().to_string(),
                phase: "total".into(),
                median_ns: median,
                iqr_ns: iqr,
            });
        }
        if !phases.is_empty() {
            let stage = |f: fn(&SketchPhases) -> Duration| {
                median_iqr(&phases.iter().map(|p| f(p).as_nanos() as f64).collect::<Vec<_>>())
            };
            for (name, (median, iqr)) in [
                ("qr", stage(|p| p.qr)),
                ("polar", stage(|p| p.polar)),
                ("other", stage(|p| p.other)),
            ] {
                rows.push(TimingRow {
                    n,
                    method: Method::GaussianSketch.name().to_string(),
                    phase: name.into(),
                    median_ns: median,
                    iqr_ns: iqr,
                });
            }
        }
    }
    rows.sort_by(|a, b| (a.n, &a.method, &a.phase).cmp(&(b.n, &b.method, &b.phase)));
    Ok(rows)
}

/// Run the study and write `timing.csv` under the output directory.
pub fn run_timing(cfg: &RunConfig) -> Result<String> {
    let csv = timing_csv(&timing_rows(cfg)?);
    write_text(&cfg.output_dir.join("timing.csv"), &csv)?;
    Ok(csv)
}
