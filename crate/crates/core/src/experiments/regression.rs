//! Optimizer comparison on matrix regression, started from `X = 0`.

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};
use crate::experiments::config::{Method, RankMode, RunConfig};
use crate::experiments::plot::{plot_run_csvs, RunColumn};
use crate::experiments::records::{write_text, RunHeader, RunRecord, RunRow};
use crate::linalg::{self, Matrix};
use crate::optimizers::{
    AdamWConfig, AdamWState, MuonState, Optimizer, RankControl, ScheduleParams, SgdmConfig, SgdmState,
};
use crate::orthogonalize::{SafeguardPolicy, SketchSpec};
use crate::problems::{gen_matrix_regression, sample_stoch_grad, MatrixRegressionInstance, NoiseModel};
use crate::{seeded_rng, Rng};

/// Optimizer for `method` on an `n x n` variable, configured from `cfg`.
pub fn build_optimizer(method: Method, cfg: &RunConfig, n: usize) -> Result<Optimizer> {
    let rank = cfg.rank_for(n);
    let mode = cfg.residual.resolve(n);
    let base = SketchSpec::gaussian(rank)
        .with_polar(cfg.polar_config())
        .with_residual(Some(mode));
    let policy = SafeguardPolicy::new(rank).with_residual_mode(mode);
    Ok(match method {
        Method::LrGd => Optimizer::LowRankGd {
            spec: base,
            lr_scale: cfg.lr_scale,
            k: 0,
        },
        Method::SafeguardedGd => Optimizer::SafeguardedGd {
            policy,
            base,
            lr_scale: cfg.lr_scale,
            k: 0,
        },
        Method::LrMuon => Optimizer::LowRankMuon {
            schedule: ScheduleParams::muon(cfg.alpha)?,
            rank: match cfg.rank_mode {
                RankMode::Fixed => RankControl::Fixed,
                RankMode::Safeguarded => RankControl::Safeguarded(policy),
            },
            base,
            lr_scale: cfg.lr_scale,
            state: MuonState::new(n, n),
        },
        Method::Muon => Optimizer::Muon {
            schedule: ScheduleParams::muon(cfg.alpha)?,
            polar: cfg.polar_config(),
            lr_scale: cfg.lr_scale,
            state: MuonState::new(n, n),
        },
        Method::Sgdm => Optimizer::Sgdm {
            cfg: SgdmConfig {
                lr: cfg.sgdm_lr,
                momentum: cfg.momentum,
                weight_decay: cfg.weight_decay,
            },
            state: SgdmState::new(n, n),
        },
        Method::AdamW => Optimizer::AdamW {
            cfg: AdamWConfig {
                lr: cfg.adamw_lr,
                weight_decay: cfg.weight_decay,
                ..AdamWConfig::default()
            },
            state: AdamWState::new(n, n),
        },
        other => return Err(Error::Config(format!("'{other}' is not an optimizer"))),
    })
}

/// Cheap exact nuclear norm of gradients of one instance. Every gradient
/// `A^T R B^T` lies in `range(A^T) x range(B^T)`, so with orthonormal bases
/// `Q_a`, `Q_b` its singular values are those of the `p x p` matrix
/// `Q_a^T G Q_b`.
pub struct GradNorms {
    qa: Matrix,
    qb: Matrix,
}

impl GradNorms {
    pub fn new(inst: &MatrixRegressionInstance) -> Result<Self> {
        Ok(Self {
            qa: linalg::qr_thin(&inst.a.transpose())?.q,
            qb: linalg::qr_thin(&inst.b)?.q,
        })
    }

    pub fn nuclear(&self, grad: &Matrix) -> f64 {
        linalg::nuclear_norm(&(linalg::t_mul(&self.qa, grad) * &self.qb))
    }
}

#[derive(Debug, Clone)]
pub struct RegressionRun {
    pub method: Method,
    pub seed: u64,
    pub n: usize,
    pub record: RunRecord,
    /// Last finite iterate.
    pub final_x: Matrix,
}

fn is_finite(m: &Matrix) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Run `method` for `cfg.iters` steps. Rows `k = 0..=K` record `X^k`; the
/// step columns of row `k` describe the step from `X^k` to `X^{k+1}`. A
/// non-finite iterate ends the run and marks it diverged.
pub fn run_method(
    inst: &MatrixRegressionInstance,
    method: Method,
    cfg: &RunConfig,
    seed: u64,
) -> Result<RegressionRun> {
    let (n, _) = inst.dims();
    let mut opt = build_optimizer(method, cfg, n)?;
    let norms = GradNorms::new(inst)?;
    let noise = NoiseModel {
        alpha: cfg.alpha,
        ..cfg.noise
    };
    let mut sketch_rng: Rng = seeded_rng(seed ^ 0xA5A5_0000_0000_0001);
    let mut noise_rng: Rng = seeded_rng(seed ^ 0xA5A5_0000_0000_0002);

    let mut x = Matrix::zeros(n, n);
    let mut rows = Vec::with_capacity(cfg.iters + 1);
    let mut elapsed = 0u128;
    let mut diverged_at = None;
    for k in 0..=cfg.iters {
        let t = Instant::now();
        let (f, grad) = inst.objective_and_gradient(&x)?;
        elapsed += t.elapsed().as_nanos();
        let grad_fro = grad.norm();
        if !f.is_finite() || !grad_fro.is_finite() {
            diverged_at = Some(k);
            break;
        }
        let mut row = RunRow {
            k,
            f,
            grad_fro,
            grad_nuc: norms.nuclear(&grad),
            rank_used: None,
            residual: None,
            elapsed_ns: elapsed,
        };
        if k == cfg.iters {
            rows.push(row);
            break;
        }
        let t = Instant::now();
        let sample = if noise.kind == crate::problems::NoiseKind::None {
            grad
        } else {
            sample_stoch_grad(inst, &x, &noise, &mut noise_rng)?
        };
        let stepped = opt.step(&x, &sample, &mut sketch_rng);
        elapsed += t.elapsed().as_nanos();
        row.elapsed_ns = elapsed;
        match stepped {
            Ok((next, report)) => {
                row.rank_used = report.rank_used;
                row.residual = report.residual;
                rows.push(row);
                if !is_finite(&next) {
                    diverged_at = Some(k + 1);
                    break;
                }
                x = next;
            }
            Err(Error::NonFinite) => {
                rows.push(row);
                diverged_at = Some(k + 1);
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let header = RunHeader {
        method: method.name().to_string(),
        seed,
        n,
        config: cfg.echo(),
        wall_clock_unix_s: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        status: if diverged_at.is_some() { "diverged" } else { "completed" }.to_string(),
        diverged_at,
    };
    Ok(RegressionRun {
        method,
        seed,
        n,
        record: RunRecord { header, rows },
        final_x: x,
    })
}

/// All `(n, seed, method)` runs, ordered by those keys.
pub fn regression_runs(cfg: &RunConfig) -> Result<Vec<RegressionRun>> {
    let methods = cfg.methods();
    if methods.is_empty() {
        return Err(Error::Config("methods must be nonempty".into()));
    }
    if let Some(m) = methods.iter().find(|m| !m.is_optimizer()) {
        return Err(Error::Config(format!("'{m}' is not an optimizer")));
    }
    if cfg.iters == 0 {
        return Err(Error::Config("iters must be at least 1".into()));
    }
    let mut runs = Vec::new();
    for n in cfg.dims() {
        for &seed in &cfg.seeds {
            let inst = gen_matrix_regression(n, cfg.p, cfg.sv_base, cfg.noise_scale, seed)?;
            for &method in &methods {
                runs.push(run_method(&inst, method, cfg, seed)?);
            }
        }
    }
    runs.sort_by_key(|r| (r.n, r.seed, r.method));
    Ok(runs)
}

#[derive(Debug, Clone)]
pub struct RegressionOutput {
    pub runs: Vec<RegressionRun>,
    pub files: Vec<PathBuf>,
}

/// Run the study, write one CSV (plus `.meta.json`) per run, and two SVG
/// plots per `(n, seed)` rendered from the CSV files just written.
pub fn run_regression(cfg: &RunConfig) -> Result<RegressionOutput> {
    let runs = regression_runs(cfg)?;
    let dir = cfg.output_dir.join("regression");
    let mut files = Vec::new();
    let mut groups: Vec<((usize, u64), Vec<(String, PathBuf)>)> = Vec::new();
    for run in &runs {
        let path = dir.join(format!("n{}_seed{}_{}.csv", run.n, run.seed, run.method));
        run.record.write(&path)?;
        files.push(path.clone());
        files.push(path.with_extension("meta.json"));
        let key = (run.n, run.seed);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push((run.method.name().to_string(), path)),
            None => groups.push((key, vec![(run.method.name().to_string(), path)])),
        }
    }
    for ((n, seed), members) in groups {
        let csvs = members
            .iter()
            .map(|(label, path)| Ok((label.clone(), std::fs::read_to_string(path)?)))
            .collect::<Result<Vec<_>>>()?;
        for (column, stem, title) in [
            (RunColumn::Objective, "objective", "objective"),
            (RunColumn::GradFro, "grad_fro", "gradient Frobenius norm"),
        ] {
            let svg = plot_run_csvs(column, &format!("matrix regression n = {n}, seed {seed}: {title}"), &csvs)?;
            let path = dir.join(format!("n{n}_seed{seed}_{stem}.svg"));
            write_text(&path, &svg)?;
            files.push(path);
        }
    }
    Ok(RegressionOutput { runs, files })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::Experiment;

    fn small_cfg() -> RunConfig {
        let mut cfg = RunConfig::new(Experiment::Regression);
        cfg.dims = Some(vec![12]);
        cfg.p = 4;
        cfg.iters = 15;
        cfg
    }

    #[test]
    fn nuclear_shortcut_matches_svd() {
        let inst = gen_matrix_regression(15, 4, 1.5, 1e-3, 2).unwrap();
        let norms = GradNorms::new(&inst).unwrap();
        let x = linalg::gaussian_matrix(15, 15, &mut seeded_rng(3));
        let g = inst.gradient(&x).unwrap();
        let exact = linalg::nuclear_norm(&g);
        assert!((norms.nuclear(&g) - exact).abs() <= 1e-10 * exact);
    }

    #[test]
    fn row_invariants() {
        let cfg = small_cfg();
        for run in regression_runs(&cfg).unwrap() {
            let rows = &run.record.rows;
            assert_eq!(rows.len(), cfg.iters + 1, "{}", run.method);
            for w in rows.windows(2) {
                assert!(w[1].k == w[0].k + 1);
                assert!(w[1].elapsed_ns >= w[0].elapsed_ns);
            }
            for r in rows {
                assert!(r.f.is_finite());
                assert!(r.grad_fro <= r.grad_nuc * (1.0 + 1e-12) + 1e-300);
                assert!(r.grad_nuc <= 12f64.sqrt() * r.grad_fro * (1.0 + 1e-12) + 1e-300);
            }
        }
    }

    #[test]
    fn divergence_is_recorded() {
        let mut cfg = small_cfg();
        cfg.methods = Some(vec![Method::Sgdm]);
        cfg.sgdm_lr = 1e3;
        cfg.iters = 400;
        let run = &regression_runs(&cfg).unwrap()[0];
        assert!(run.record.diverged());
        assert_eq!(run.record.header.status, "diverged");
        assert!(run.record.rows.iter().all(|r| r.f.is_finite()));
        assert!(is_finite(&run.final_x));
        assert_eq!(run.record.grad_fro_at(cfg.iters), f64::INFINITY);
    }

    #[test]
    fn rejects_p_above_n() {
        let mut cfg = small_cfg();
        cfg.p = 20;
        assert!(regression_runs(&cfg).is_err());
    }
}
