//! Acceptance criteria, run serially (the timing criterion must not share
//! the CPU). Prints one line per criterion and exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use lowrank_core::experiments::config::{Experiment, Method, RunConfig};
use lowrank_core::experiments::regression::run_method;
use lowrank_core::experiments::robustness::{averaged_cov_trace, Estimator};
use lowrank_core::experiments::timing::timing_rows;
use lowrank_core::linalg::{
    gaussian_matrix, msgn_exact, nuclear_norm, random_orthonormal, Matrix, PolarConfig,
};
use lowrank_core::optimizers::{
    gd_rate_rhs, step_lowrank_muon, step_safeguarded_gd, step_vanilla_muon, MuonState, RankControl,
    ScheduleKind, ScheduleParams, TheoryBounds,
};
use lowrank_core::orthogonalize::{sketch_sign, sketch_sign_gaussian, SafeguardPolicy, SketchSpec};
use lowrank_core::problems::{gen_matrix_regression, sample_noise, MatrixRegressionInstance, NoiseModel};
use lowrank_core::seeded_rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Matrix with prescribed singular values and random singular vectors.
fn with_spectrum(n: usize, s: &[f64], seed: u64) -> Matrix {
    let mut rng = seeded_rng(seed);
    let mut u = random_orthonormal(n, s.len(), &mut rng);
    let v = random_orthonormal(n, s.len(), &mut rng);
    for (j, &sj) in s.iter().enumerate() {
        u.column_mut(j).scale_mut(sj);
    }
    u * v.transpose()
}

fn factorization_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(100);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = gaussian_matrix(40, 30, &mut rng);
        for r in [4, 8, 16] {
            let sign = sketch_sign_gaussian(&m, &SketchSpec::gaussian(r), &mut rng).unwrap();
            let projected = &sign.q * sign.q.tr_mul(&m);
            let reference = msgn_exact(&projected).unwrap();
            worst = worst.max((sign.materialize() - reference).norm());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-8 && elapsed < Duration::from_secs(5),
        format!("max deviation {worst:.2e} (<= 1e-8), {elapsed:.2?} (< 5 s)"),
    )
}

fn sketch_error_bound() -> Outcome {
    let start = Instant::now();
    let (n, r, r_star, seeds) = (60, 12, 6, 500);
    let spectrum: Vec<f64> = (0..n).map(|i| 0.85f64.powi(i as i32)).collect();
    let m = with_spectrum(n, &spectrum, 7);
    let tail = spectrum[r_star..].iter().map(|s| s * s).sum::<f64>().sqrt();
    let bound = (1.0 + r_star as f64 / (r - r_star - 1) as f64).sqrt() * tail;
    let mean = (0..seeds as u64)
        .map(|seed| {
            let sign = sketch_sign_gaussian(&m, &SketchSpec::gaussian(r), &mut seeded_rng(seed)).unwrap();
            (&m - &sign.q * sign.q.tr_mul(&m)).norm()
        })
        .sum::<f64>()
        / seeds as f64;
    let limit = bound * (1.0 + 3.0 / (seeds as f64).sqrt());
    let elapsed = start.elapsed();
    outcome(
        mean <= limit && elapsed < Duration::from_secs(30),
        format!("mean {mean:.4e} <= {limit:.4e} (bound {bound:.4e}), {elapsed:.2?} (< 30 s)"),
    )
}

fn exact_recovery() -> Outcome {
    let r = 10;
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = seeded_rng(200 + seed);
        for k in [1, 5, r] {
            let m = gaussian_matrix(50, k, &mut rng) * gaussian_matrix(k, 40, &mut rng);
            let target = msgn_exact(&m).unwrap();
            for spec in [SketchSpec::gaussian(r), SketchSpec::power(r, 2)] {
                let err = (sketch_sign(&m, &spec, &mut rng).unwrap().materialize() - &target).norm();
                worst = worst.max(err);
                if err > 1e-8 {
                    failures += 1;
                }
            }
        }
    }
    outcome(failures == 0, format!("{failures} failures over 120 cases, max error {worst:.2e}"))
}

struct GdTrace {
    /// `||grad f(X^k)||_*` for `k = 0..K`.
    grad_nuc: Vec<f64>,
    /// `f(X^{k+1}) - bound_k`.
    excess: Vec<f64>,
    u_gd: f64,
}

/// Safeguarded GD from zero on the n = 200 regression instance. Nuclear
/// norms are recomputed here from full SVDs.
fn safeguarded_gd_trace(inst: &MatrixRegressionInstance, iters: usize) -> GdTrace {
    let (n, _) = inst.dims();
    let policy = SafeguardPolicy::new(n / 10);
    let base = SketchSpec::gaussian(n / 10);
    let mut rng = seeded_rng(11);
    let mut x = Matrix::zeros(n, n);
    let lip = inst.lipschitz_upper;
    let mut grad_nuc = Vec::with_capacity(iters);
    let mut excess = Vec::with_capacity(iters);
    let (mut f, mut g) = inst.objective_and_gradient(&x).unwrap();
    let f0 = f;
    for k in 0..iters {
        let g_nuc = nuclear_norm(&g);
        grad_nuc.push(g_nuc);
        let (next, sign) = step_safeguarded_gd(&x, &g, k, &policy, &base, 1.0, &mut rng).unwrap();
        let sign = sign.expect("nonzero gradient");
        let residual = nuclear_norm(&(&g - &sign.q * sign.q.tr_mul(&g)));
        let eta = ScheduleParams::gd(ScheduleKind::SafeguardedGd).at(k).eta;
        let bound = f - eta * g_nuc + 2.0 * eta * residual + 0.5 * lip * eta * eta;
        let (f_next, g_next) = inst.objective_and_gradient(&next).unwrap();
        excess.push(f_next - bound);
        (x, f, g) = (next, f_next, g_next);
    }
    let theory = TheoryBounds {
        f_low: 0.0,
        l_star: lip,
        sigma: 0.0,
        alpha: 2.0,
        rho: n,
    };
    GdTrace {
        grad_nuc,
        excess,
        u_gd: theory.u_gd(f0),
    }
}

fn descent_oracle(trace: &GdTrace) -> Outcome {
    let worst = trace.excess[..500].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        -worst >= -1e-6,
        format!("min slack {:.4e} over 500 steps (>= -1e-6)", -worst),
    )
}

fn rate_bound(trace: &GdTrace) -> Outcome {
    let mut best = f64::INFINITY;
    let min_grad: Vec<f64> = trace
        .grad_nuc
        .iter()
        .map(|&g| {
            best = best.min(g);
            best
        })
        .collect();
    // min_grad[K - 1] = min_{k < K}.
    let worst_ratio = (3..=500)
        .map(|k| min_grad[k - 1] / gd_rate_rhs(trace.u_gd, k as f64))
        .fold(0.0, f64::max);
    let (xs, ys): (Vec<f64>, Vec<f64>) = (50..=2000)
        .map(|k| ((k as f64).ln(), min_grad[k - 1].ln()))
        .unzip();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    outcome(
        worst_ratio <= 1.0 && slope <= -0.35,
        format!("max min-grad / bound {worst_ratio:.3e} (<= 1), log-log slope {slope:.3} (<= -0.35)"),
    )
}

fn full_rank_reduction() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        let inst = gen_matrix_regression(200, 20, 1.2, 1e-3, seed).unwrap();
        let schedule = ScheduleParams::muon(2.0).unwrap();
        let rank = RankControl::Safeguarded(SafeguardPolicy::new(200));
        let base = SketchSpec::gaussian(200).with_polar(PolarConfig::exact());
        let mut rng = seeded_rng(seed);
        let (mut xa, mut xb) = (Matrix::zeros(200, 200), Matrix::zeros(200, 200));
        let (mut sa, mut sb) = (MuonState::new(200, 200), MuonState::new(200, 200));
        for _ in 0..50 {
            let ga = inst.gradient(&xa).unwrap();
            let gb = inst.gradient(&xb).unwrap();
            let (na, ta) = step_lowrank_muon(&sa, &xa, &ga, &schedule, &rank, &base, 1.0, &mut rng).unwrap();
            let (nb, tb) = step_vanilla_muon(&sb, &xb, &gb, &schedule, &PolarConfig::exact(), 1.0).unwrap();
            (xa, sa, xb, sb) = (na, ta, nb, tb);
            worst = worst.max((&xa - &xb).norm());
        }
    }
    outcome(worst <= 1e-8, format!("max per-iterate deviation {worst:.2e} over 3 seeds x 50 steps"))
}

fn noise_robustness() -> Outcome {
    let start = Instant::now();
    let ns = PolarConfig::newton_schulz(5);
    let full = averaged_cov_trace(500, 1.0, Estimator::NewtonSchulzFull, &ns, 5, 30, 0).unwrap();
    let sketch = averaged_cov_trace(500, 1.0, Estimator::GaussianSketch { rank: 50 }, &ns, 5, 30, 0).unwrap();
    let elapsed = start.elapsed();
    outcome(
        sketch <= 0.5 * full && elapsed < Duration::from_secs(180),
        format!("cov_trace sketch {sketch:.3} vs full {full:.3} (ratio {:.3}), {elapsed:.1?}", sketch / full),
    )
}

fn timing_direction() -> Outcome {
    let mut cfg = RunConfig::new(Experiment::Timing);
    cfg.dims = Some(vec![2048]);
    cfg.methods = Some(vec![Method::ExactSvd, Method::NewtonSchulz, Method::GaussianSketch]);
    let rows = timing_rows(&cfg).unwrap();
    let median = |method: &str| {
        rows.iter()
            .find(|r| r.method == method && r.phase == "total")
            .map(|r| r.median_ns)
            .unwrap()
    };
    let (svd, ns, gs) = (median("exact-svd"), median("newton-schulz"), median("gaussian-sketch"));
    outcome(
        gs <= 0.5 * svd && gs <= ns,
        format!(
            "median ms: gaussian-sketch {:.1}, exact-svd {:.1}, newton-schulz {:.1}",
            gs / 1e6,
            svd / 1e6,
            ns / 1e6
        ),
    )
}

fn regression_direction() -> Outcome {
    let mut cfg = RunConfig::new(Experiment::Regression);
    cfg.iters = 2000;
    let mut votes = 0;
    let mut details = Vec::new();
    for seed in 0..3 {
        let inst = gen_matrix_regression(200, cfg.p, cfg.sv_base, cfg.noise_scale, seed).unwrap();
        let final_grad = |method: Method, cfg: &RunConfig| {
            run_method(&inst, method, cfg, seed).unwrap().record.grad_fro_at(cfg.iters)
        };
        let lr_muon = final_grad(Method::LrMuon, &cfg);
        let muon = final_grad(Method::Muon, &cfg);
        // Best SGDM over a small learning-rate grid; a diverged run counts
        // as +inf.
        let sgdm = [1e-4, 1e-3, 1e-2]
            .into_iter()
            .map(|lr| {
                let mut c = cfg.clone();
                c.sgdm_lr = lr;
                final_grad(Method::Sgdm, &c)
            })
            .fold(f64::INFINITY, f64::min);
        let ok = lr_muon <= 0.1 * sgdm && muon <= 0.1 * sgdm;
        votes += ok as usize;
        details.push(format!("seed {seed}: lr-muon {lr_muon:.3e}, muon {muon:.3e}, sgdm {sgdm:.3e}"));
    }
    outcome(votes >= 2, format!("{votes}/3 seeds; {}", details.join("; ")))
}

fn schedule_correctness() -> Outcome {
    let s = ScheduleParams::muon(2.0).unwrap().at(15);
    let exact = s.eta == 0.125 && s.theta == Some(0.25) && s.delta == Some(0.5);
    let mut params = vec![
        ScheduleParams::gd(ScheduleKind::FixedRankGd),
        ScheduleParams::gd(ScheduleKind::SafeguardedGd),
    ];
    for a in [1.05, 1.25, 1.5, 1.75, 2.0] {
        params.push(ScheduleParams::muon(a).unwrap());
    }
    let mut ks: Vec<usize> = (0..2000).collect();
    ks.extend((2..=1000).map(|i| i * 1000));
    let mut ok = true;
    for p in &params {
        let s0 = p.at(0);
        ok &= s0.eta == 1.0 && s0.theta.unwrap_or(1.0) == 1.0 && s0.delta.unwrap_or(1.0) == 1.0;
        for w in ks.windows(2) {
            let (a, b) = (p.at(w[0]), p.at(w[1]));
            ok &= b.eta <= a.eta;
            ok &= b.theta.unwrap_or(0.0) <= a.theta.unwrap_or(0.0);
            ok &= b.delta.unwrap_or(0.0) <= a.delta.unwrap_or(0.0);
        }
    }
    outcome(
        exact && ok,
        format!(
            "(eta, theta, delta)_15 = ({}, {:?}, {:?}); k=0 and monotonicity {}",
            s.eta,
            s.theta.unwrap(),
            s.delta.unwrap(),
            if ok { "hold" } else { "violated" }
        ),
    )
}

fn heavy_tail_calibration() -> Outcome {
    let sigma = 1.3;
    let mut errs = Vec::new();
    for (i, alpha) in [1.5, 2.0].into_iter().enumerate() {
        let noise = NoiseModel::heavy_tail(sigma, alpha).unwrap();
        let mut rng = seeded_rng(300 + i as u64);
        let draws = 100_000;
        let moment = (0..draws)
            .map(|_| sample_noise(4, 3, &noise, &mut rng).norm().powf(alpha))
            .sum::<f64>()
            / draws as f64;
        errs.push((alpha, moment / sigma.powf(alpha) - 1.0));
    }
    let ok = errs.iter().all(|(_, e)| e.abs() <= 0.1);
    let detail = errs
        .iter()
        .map(|(a, e)| format!("alpha {a}: relative error {e:+.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(ok, detail)
}

fn gradient_correctness() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = seeded_rng(400);
    for t in 0..10u64 {
        let n = 6 + 3 * t as usize;
        let p = 2 + t as usize % 4;
        let inst = gen_matrix_regression(n, p, 1.3, 1e-3, 500 + t).unwrap();
        let x = gaussian_matrix(n, n, &mut rng);
        let g = inst.gradient(&x).unwrap();
        let h = 1e-5;
        // One random direction and three coordinate directions per instance.
        let mut dirs = vec![gaussian_matrix(n, n, &mut rng)];
        for c in 0..3 {
            let mut e = Matrix::zeros(n, n);
            e[((c * 5 + t as usize) % n, (c * 3) % n)] = 1.0;
            dirs.push(e);
        }
        for d in dirs {
            let fd = (inst.objective(&(&x + &d * h)).unwrap() - inst.objective(&(&x - &d * h)).unwrap()) / (2.0 * h);
            let an = g.dot(&d);
            let scale = an.abs().max(g.norm() * d.norm() * 1e-3);
            worst = worst.max((fd - an).abs() / scale);
        }
    }
    outcome(worst <= 1e-4, format!("max relative error {worst:.2e} over 10 instances (<= 1e-4)"))
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "factorization identity", factorization_identity()));
    print_last(&results);
    results.push((2, "sketch error bound", sketch_error_bound()));
    print_last(&results);
    results.push((3, "exact recovery", exact_recovery()));
    print_last(&results);
    let inst = gen_matrix_regression(200, 20, 1.2, 1e-3, 0).unwrap();
    let trace = safeguarded_gd_trace(&inst, 2000);
    results.push((4, "descent oracle", descent_oracle(&trace)));
    print_last(&results);
    results.push((5, "safeguarded GD rate", rate_bound(&trace)));
    print_last(&results);
    results.push((6, "full-rank reduction", full_rank_reduction()));
    print_last(&results);
    results.push((7, "noise robustness", noise_robustness()));
    print_last(&results);
    results.push((8, "timing direction", timing_direction()));
    print_last(&results);
    results.push((9, "regression direction", regression_direction()));
    print_last(&results);
    results.push((10, "schedule correctness", schedule_correctness()));
    print_last(&results);
    results.push((11, "heavy-tail calibration", heavy_tail_calibration()));
    print_last(&results);
    results.push((12, "gradient correctness", gradient_correctness()));
    print_last(&results);

    let failed = results.iter().filter(|(_, _, o)| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn print_last(results: &[(usize, &str, Outcome)]) {
    let (id, name, o) = results.last().unwrap();
    println!(
        "criterion {id:>2} [{}] {name}: {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
}
