//! Sensitivity of matrix-sign estimates to additive Gaussian noise on
//! near-low-rank matrices.

use crate::error::{Error, Result};
use crate::experiments::config::RunConfig;
use crate::experiments::records::{robustness_csv, write_text, RobustnessRow};
use crate::linalg::{newton_schulz, PolarConfig};
use crate::orthogonalize::{sketch_sign_gaussian, SketchSpec};
use crate::problems::{empirical_sign_covariance, gen_near_lowrank, NearLowRankSpec};
use crate::{seeded_rng, Rng};

pub const NS_FULL: &str = "newton-schulz-full";
pub const GAUSSIAN_SKETCH: &str = "gaussian-sketch";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    /// Newton-Schulz on the whole noisy matrix.
    NewtonSchulzFull,
    /// Rank-`r` Gaussian sketch with a fresh test matrix per draw.
    GaussianSketch { rank: usize },
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Self::NewtonSchulzFull => NS_FULL,
            Self::GaussianSketch { .. } => GAUSSIAN_SKETCH,
        }
    }
}

/// Covariance trace of `estimator` averaged over `bases` matrices, with the
/// noise draws paired across estimators through `seed`.
pub fn averaged_cov_trace(
    n: usize,
    noise_var: f64,
    estimator: Estimator,
    polar: &PolarConfig,
    bases: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if bases == 0 {
        return Err(Error::InvalidArgument("need at least one base matrix".into()));
    }
    let spec = NearLowRankSpec::new(n);
    let mut total = 0.0;
    for b in 0..bases as u64 {
        let base_seed = seed.wrapping_mul(1_000_003).wrapping_add(b);
        let m = gen_near_lowrank(&spec, base_seed)?;
        let mut noise_rng = seeded_rng(base_seed ^ 0x5EED_0001);
        let mut sketch_rng = seeded_rng(base_seed ^ 0x5EED_0002);
        let trace = match estimator {
            Estimator::NewtonSchulzFull => empirical_sign_covariance(
                &m,
                noise_var,
                trials,
                |noisy: &crate::Matrix, _: &mut Rng| newton_schulz(noisy, polar),
                &mut noise_rng,
            )?,
            Estimator::GaussianSketch { rank } => {
                let sketch = SketchSpec::gaussian(rank).with_polar(*polar).with_residual(None);
                empirical_sign_covariance(
                    &m,
                    noise_var,
                    trials,
                    |noisy: &crate::Matrix, _: &mut Rng| {
                        Ok(sketch_sign_gaussian(noisy, &sketch, &mut sketch_rng)?.materialize())
                    },
                    &mut noise_rng,
                )?
            }
        };
        total += trace;
    }
    Ok(total / bases as f64)
}

pub fn robustness_rows(cfg: &RunConfig) -> Result<Vec<RobustnessRow>> {
    if cfg.noise_vars.is_empty() {
        return Err(Error::Config("noise_vars must be nonempty".into()));
    }
    let seed = cfg.seeds.first().copied().unwrap_or(0);
    let polar = cfg.ns_config();
    let mut rows = Vec::new();
    for n in cfg.dims() {
        let rank = cfg.rank.unwrap_or_else(|| NearLowRankSpec::new(n).head_count()).clamp(1, n);
        for &sigma2 in &cfg.noise_vars {
            for estimator in [Estimator::NewtonSchulzFull, Estimator::GaussianSketch { rank }] {
                let cov_trace =
                    averaged_cov_trace(n, sigma2, estimator, &polar, cfg.bases, cfg.trials, seed)?;
                rows.push(RobustnessRow {
                    n,
                    sigma2,
                    estimator: estimator.name().to_string(),
                    cov_trace,
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.n, a.sigma2, &a.estimator)
            .partial_cmp(&(b.n, b.sigma2, &b.estimator))
            .expect("finite keys")
    });
    Ok(rows)
}

/// Run the study and write `robustness.csv` under the output directory.
pub fn run_robustness(cfg: &RunConfig) -> Result<String> {
    let csv = robustness_csv(&robustness_rows(cfg)?);
    write_text(&cfg.output_dir.join("robustness.csv"), &csv)?;
    Ok(csv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::Experiment;

    #[test]
    fn zero_noise_full_newton_schulz_has_zero_spread() {
        let t = averaged_cov_trace(20, 0.0, Estimator::NewtonSchulzFull, &PolarConfig::newton_schulz(5), 2, 5, 0)
            .unwrap();
        assert_eq!(t, 0.0);
    }

    #[test]
    fn rows_are_sorted_and_complete() {
        let mut cfg = RunConfig::new(Experiment::Robustness);
        cfg.dims = Some(vec![20]);
        cfg.noise_vars = vec![1.0, 0.0];
        cfg.bases = 1;
        cfg.trials = 4;
        let rows = robustness_rows(&cfg).unwrap();
        let keys: Vec<(f64, &str)> = rows.iter().map(|r| (r.sigma2, r.estimator.as_str())).collect();
        assert_eq!(
            keys,
            [(0.0, GAUSSIAN_SKETCH), (0.0, NS_FULL), (1.0, GAUSSIAN_SKETCH), (1.0, NS_FULL)]
        );
        assert_eq!(rows[1].cov_trace, 0.0);
        assert_eq!(robustness_rows(&cfg).unwrap(), rows);
    }
}
