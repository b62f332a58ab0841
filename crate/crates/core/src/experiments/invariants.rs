//! Batch check of the library's identities and bounds, reported as JSON
//! lines. Each property reports a measured value and the bound it must not
//! exceed.

use serde::Serialize;

use crate::error::Result;
use crate::experiments::config::RunConfig;
use crate::experiments::records::write_text;
use crate::linalg::{
    self, best_rank_k, gaussian_matrix, msgn_exact, newton_schulz, nuclear_norm, random_orthonormal,
    singular_values, spectral_norm, Matrix, PolarConfig,
};
use crate::optimizers::{
    step_lowrank_muon, step_safeguarded_gd, step_vanilla_muon, MuonState, RankControl, ScheduleKind,
    ScheduleParams, TheoryBounds,
};
use crate::orthogonalize::{
    column_probabilities, safeguarded_sketch, sketch_sign, sketch_sign_gaussian, sketch_sign_power, SafeguardPolicy,
    SketchSpec,
};
use crate::problems::{
    container, empirical_sign_covariance, gen_matrix_regression, gen_near_lowrank, sample_noise,
    MatrixRegressionInstance, NearLowRankSpec, NoiseModel,
};
use crate::{seeded_rng, Rng};

/// Matrix-sign routine under test.
pub type SignFn = fn(&Matrix) -> Result<Matrix>;

#[derive(Debug, Clone, Copy)]
pub struct InvariantContext {
    pub sign: SignFn,
    pub seed: u64,
}

impl Default for InvariantContext {
    fn default() -> Self {
        Self {
            sign: msgn_exact,
            seed: 0,
        }
    }
}

/// `U V^T` with the columns of `V` reversed: singular vectors paired wrongly.
pub fn corrupted_msgn(m: &Matrix) -> Result<Matrix> {
    let f = linalg::svd_reduced(m)?;
    let k = f.v.ncols();
    let reversed = Matrix::from_fn(f.v.nrows(), k, |i, j| f.v[(i, k - 1 - j)]);
    Ok(&f.u * reversed.transpose())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub property: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct Property {
    pub name: &'static str,
    /// Returns `(measured, bound)`; passes when `measured <= bound`.
    pub check: fn(&InvariantContext) -> Result<(f64, f64)>,
}

pub fn registered_properties() -> Vec<Property> {
    macro_rules! props {
        ($($name:ident),* $(,)?) => {
            vec![$(Property { name: stringify!($name), check: $name }),*]
        };
    }
    props![
        msgn_singular_values_are_one,
        msgn_nuclear_pairing,
        qr_orthonormal_basis,
        best_rank_k_tail_energy,
        newton_schulz_accuracy,
        factorization_identity,
        exact_recovery_low_rank,
        sketch_error_bound,
        column_probabilities_normalized,
        power_q0_matches_gaussian,
        safeguard_certificate,
        schedule_alpha2_values,
        schedules_nonincreasing,
        signed_step_length,
        full_rank_reduction,
        descent_oracle,
        gd_rate_bound,
        gradient_finite_difference,
        lipschitz_upper_bound,
        heavy_tail_alpha_moment,
        zero_noise_covariance,
        momentum_ignores_sketch,
        container_roundtrip,
    ]
}

pub fn evaluate(prop: &Property, ctx: &InvariantContext) -> PropertyResult {
    match (prop.check)(ctx) {
        Ok((measured, bound)) => PropertyResult {
            property: prop.name.to_string(),
            measured,
            bound,
            pass: measured <= bound,
            error: None,
        },
        Err(e) => PropertyResult {
            property: prop.name.to_string(),
            measured: f64::NAN,
            bound: f64::NAN,
            pass: false,
            error: Some(e.to_string()),
        },
    }
}

#[derive(Debug, Clone)]
pub struct InvariantReport {
    pub results: Vec<PropertyResult>,
}

impl InvariantReport {
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    pub fn to_json_lines(&self) -> String {
        self.results
            .iter()
            .map(|r| serde_json::to_string(r).expect("result serializes") + "\n")
            .collect()
    }
}

pub fn check_all(ctx: &InvariantContext) -> InvariantReport {
    InvariantReport {
        results: registered_properties().iter().map(|p| evaluate(p, ctx)).collect(),
    }
}

/// Run every property and write `invariants.jsonl` under the output directory.
pub fn run_invariants(cfg: &RunConfig) -> Result<InvariantReport> {
    let ctx = InvariantContext {
        seed: cfg.seeds.first().copied().unwrap_or(0),
        ..InvariantContext::default()
    };
    let report = check_all(&ctx);
    write_text(&cfg.output_dir.join("invariants.jsonl"), &report.to_json_lines())?;
    Ok(report)
}

fn rng(ctx: &InvariantContext, salt: u64) -> Rng {
    seeded_rng(ctx.seed.wrapping_mul(0x100_0000_01B3) ^ salt)
}

/// `U diag(s) V^T` with random orthonormal factors.
fn with_spectrum(rows: usize, cols: usize, s: &[f64], rng: &mut Rng) -> Matrix {
    let u = random_orthonormal(rows, s.len(), rng);
    let v = random_orthonormal(cols, s.len(), rng);
    let mut us = u;
    for (j, &sj) in s.iter().enumerate() {
        us.column_mut(j).scale_mut(sj);
    }
    us * v.transpose()
}

fn msgn_singular_values_are_one(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let mut r = rng(ctx, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let s = (ctx.sign)(&gaussian_matrix(40, 30, &mut r))?;
        for v in singular_values(&s) {
            worst = worst.max((v - 1.0).abs());
        }
    }
    Ok((worst, 1e-10))
}

fn msgn_nuclear_pairing(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let mut r = rng(ctx, 2);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let m = gaussian_matrix(40, 30, &mut r);
        let nuc = nuclear_norm(&m);
        worst = worst.max((linalg::inner(&(ctx.sign)(&m)?, &m) - nuc).abs() / nuc);
    }
    Ok((worst, 1e-10))
}

fn qr_orthonormal_basis(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let mut r = rng(ctx, 3);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let m = gaussian_matrix(50, 12, &mut r);
        let q = linalg::qr_thin(&m)?.q;
        let gram = linalg::t_mul(&q, &q) - Matrix::identity(12, 12);
        let proj = &q * linalg::t_mul(&q, &m) - &m;
        worst = worst.max(gram.norm()).max(proj.norm() / m.norm());
    }
    Ok((worst, 1e-12))
}

fn best_rank_k_tail_energy(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let mut r = rng(ctx, 4);
    let m = gaussian_matrix(30, 20, &mut r);
    let sv = singular_values(&m);
    let mut worst: f64 = 0.0;
    for k in 1..=20 {
        let err = (&m - best_rank_k(&m, k)?).norm_squared();
        let tail: f64 = sv[k..].iter().map(|s| s * s).sum();
        worst = worst.max((err - tail).abs() / m.norm_squared());
    }
    Ok((worst, 1e-10))
}

fn newton_schulz_accuracy(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let mut r = rng(ctx, 5);
    let s: Vec<f64> = (0..20).map(|i| 1.0 - 0.9 * i as f64 / 19.0).collect();
    let m = with_spectrum(30, 20, &s, &mut r);
    let approx = newton_schulz(&m, &PolarConfig::newton_schulz(10))?;
    Ok((spectral_norm(&(approx - msgn_exact(&m)?)), 0.05))
}

fn factorization_identity(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let mut r = rng(ctx, 6);
    let mut worst: f64 = 0.0;
    for t in 0..100 {
        let rank = [4, 8, 16][t % 3];
        let m = gaussian_matrix(40, 30, &mut r);
        let q = linalg::qr_thin(&(&m * gaussian_matrix(30, rank, &mut r)))?.q;
        let lhs = (ctx.sign)(&(&q * linalg::t_mul(&q, &m)))?;
        let rhs = &q * (ctx.sign)(&linalg::t_mul(&q, &m))?;
        worst = worst.max((lhs - rhs).norm());
    }
    Ok((worst, 1e-8))
}

fn exact_recovery_low_rank(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let mut r = rng(ctx, 7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let m = gaussian_matrix(30, 5, &mut r) * gaussian_matrix(5, 25, &mut r);
        let target = msgn_exact(&m)?;
        for spec in [SketchSpec::gaussian(8), SketchSpec::power(8, 1)] {
            let est = sketch_sign(&m, &spec, &mut r)?.materialize();
            worst = worst.max((est - &target).norm());
        }
    }
    Ok((worst, 1e-8))
}

/// Monte-Carlo mean of `||(I - QQ^T) M||_F` relative to the expectation bound.
fn sketch_error_bound(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let (n, rank, r_star, seeds) = (60usize, 12usize, 6usize, 500usize);
    let s: Vec<f64> = (0..n).map(|i| 0.8f64.powi(i as i32)).collect();
    let m = with_spectrum(n, n, &s, &mut rng(ctx, 8));
    let tail: f64 = s[r_star..].iter().map(|v| v * v).sum::<f64>().sqrt();
    let bound = (1.0 + r_star as f64 / (rank - r_star - 1) as f64).sqrt() * tail;
    let mut total = 0.0;
    for seed in 0..seeds as u64 {
        let mut r = seeded_rng(seed);
        let q = linalg::qr_thin(&(&m * gaussian_matrix(n, rank, &mut r)))?.q;
        total += (&m - &q * linalg::t_mul(&q, &m)).norm();
    }
    Ok((total / seeds as f64 / bound, 1.0 + 3.0 / (seeds as f64).sqrt()))
}

fn column_probabilities_normalized(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let m = gaussian_matrix(20, 35, &mut rng(ctx, 9));
    let p = column_probabilities(&m)?;
    let negative = p.iter().filter(|v| **v < 0.0).count() as f64;
    Ok(((p.iter().sum::<f64>() - 1.0).abs() + negative, 1e-12))
}

fn power_q0_matches_gaussian(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let m = gaussian_matrix(25, 20, &mut rng(ctx, 10));
    let a = sketch_sign_gaussian(&m, &SketchSpec::gaussian(6), &mut seeded_rng(ctx.seed))?;
    let b = sketch_sign_power(&m, &SketchSpec::power(6, 0), &mut seeded_rng(ctx.seed))?;
    let same = a.q == b.q && a.s == b.s && a.r_used == b.r_used;
    Ok((if same { 0.0 } else { 1.0 }, 0.0))
}

/// Accepted sketches satisfy `residual <= delta` unless they reached full rank.
fn safeguard_certificate(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let mut r = rng(ctx, 11);
    let m = gen_near_lowrank(&NearLowRankSpec::new(40), ctx.seed)?;
    let mut worst = f64::NEG_INFINITY;
    for t in 0..20 {
        let delta = 10f64.powi(-(t % 5) as i32);
        let sign = safeguarded_sketch(&m, delta, &SafeguardPolicy::new(2), &SketchSpec::gaussian(2), &mut r)?;
        let excess = if sign.r_used == 40 { 0.0 } else { sign.residual_value() - delta };
        worst = worst.max(excess);
    }
    Ok((worst, 0.0))
}

fn schedule_alpha2_values(_: &InvariantContext) -> Result<(f64, f64)> {
    let s = ScheduleParams::muon(2.0)?.at(15);
    let dev = (s.eta - 0.125).abs() + (s.theta.unwrap_or(f64::NAN) - 0.25).abs()
        + (s.delta.unwrap_or(f64::NAN) - 0.5).abs();
    Ok((dev, 0.0))
}

fn schedules_nonincreasing(_: &InvariantContext) -> Result<(f64, f64)> {
    let params = [
        ScheduleParams::gd(ScheduleKind::FixedRankGd),
        ScheduleParams::gd(ScheduleKind::SafeguardedGd),
        ScheduleParams::muon(1.1)?,
        ScheduleParams::muon(1.5)?,
        ScheduleParams::muon(2.0)?,
    ];
    let mut ks: Vec<usize> = (0..=1000).collect();
    ks.extend((1..=1000).map(|i| i * 1000));
    let mut worst: f64 = 0.0;
    for p in params {
        let s0 = p.at(0);
        for v in [Some(s0.eta), s0.theta, s0.delta].into_iter().flatten() {
            worst = worst.max((v - 1.0).abs());
        }
        for w in ks.windows(2) {
            let (a, b) = (p.at(w[0]), p.at(w[1]));
            worst = worst.max(b.eta - a.eta);
            if let (Some(x), Some(y)) = (a.theta, b.theta) {
                worst = worst.max(y - x);
            }
            if let (Some(x), Some(y)) = (a.delta, b.delta) {
                worst = worst.max(y - x);
            }
        }
    }
    Ok((worst, 0.0))
}

fn signed_step_length(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let mut r = rng(ctx, 12);
    let x = gaussian_matrix(20, 15, &mut r);
    let g = gaussian_matrix(20, 15, &mut r);
    let mut worst: f64 = 0.0;
    for k in [0usize, 3, 99] {
        let eta = ScheduleParams::gd(ScheduleKind::FixedRankGd).at(k).eta;
        let spec = SketchSpec::gaussian(15);
        let (next, _) = crate::optimizers::step_fixed_rank_gd(&x, &g, k, &spec, 1.0, &mut r)?;
        worst = worst.max((spectral_norm(&(next - &x)) - eta).abs());
    }
    Ok((worst, 1e-10))
}

fn full_rank_reduction(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        let inst = gen_matrix_regression(30, 6, 1.2, 1e-3, ctx.seed + seed)?;
        let schedule = ScheduleParams::muon(2.0)?;
        let rank = RankControl::Safeguarded(SafeguardPolicy::new(30));
        let base = SketchSpec::gaussian(30);
        let mut r = seeded_rng(seed);
        let (mut xa, mut xb) = (Matrix::zeros(30, 30), Matrix::zeros(30, 30));
        let (mut sa, mut sb) = (MuonState::new(30, 30), MuonState::new(30, 30));
        for _ in 0..50 {
            let (na, ta) = step_lowrank_muon(&sa, &xa, &inst.gradient(&xa)?, &schedule, &rank, &base, 1.0, &mut r)?;
            let (nb, tb) = step_vanilla_muon(&sb, &xb, &inst.gradient(&xb)?, &schedule, &PolarConfig::exact(), 1.0)?;
            (xa, sa, xb, sb) = (na, ta, nb, tb);
            worst = worst.max((&xa - &xb).norm());
        }
    }
    Ok((worst, 1e-8))
}

/// Safeguarded GD trace on a small instance: `(f_k, ||grad_k||_*, next f, bound)`.
fn safeguarded_trace(
    ctx: &InvariantContext,
    iters: usize,
) -> Result<(MatrixRegressionInstance, Vec<(f64, f64, f64, f64)>)> {
    let inst = gen_matrix_regression(40, 8, 1.2, 1e-3, ctx.seed)?;
    let policy = SafeguardPolicy::new(2);
    let base = SketchSpec::gaussian(2);
    let mut r = rng(ctx, 13);
    let mut x = Matrix::zeros(40, 40);
    let mut out = Vec::with_capacity(iters);
    for k in 0..iters {
        let (f, g) = inst.objective_and_gradient(&x)?;
        let (next, sign) = step_safeguarded_gd(&x, &g, k, &policy, &base, 1.0, &mut r)?;
        let eta = ScheduleParams::gd(ScheduleKind::SafeguardedGd).at(k).eta;
        let residual = sign.map_or(0.0, |s| s.residual_value());
        let g_nuc = nuclear_norm(&g);
        let bound = crate::optimizers::descent_bound(f, g_nuc, residual, eta, inst.lipschitz_upper);
        let f_next = inst.objective(&next)?;
        out.push((f, g_nuc, f_next, bound));
        x = next;
    }
    Ok((inst, out))
}

fn descent_oracle(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let (_, trace) = safeguarded_trace(ctx, 150)?;
    let worst = trace
        .iter()
        .map(|&(_, _, f_next, bound)| f_next - bound)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((worst, 1e-6))
}

fn gd_rate_bound(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let (inst, trace) = safeguarded_trace(ctx, 150)?;
    let theory = TheoryBounds {
        f_low: 0.0,
        l_star: inst.lipschitz_upper,
        sigma: 0.0,
        alpha: 2.0,
        rho: 40,
    };
    let u = theory.u_gd(trace[0].0);
    let mut best = f64::INFINITY;
    let mut worst: f64 = 0.0;
    for (k, &(_, g_nuc, _, _)) in trace.iter().enumerate() {
        best = best.min(g_nuc);
        let horizon = k + 1;
        if horizon >= 3 {
            worst = worst.max(best / crate::optimizers::gd_rate_rhs(u, horizon as f64));
        }
    }
    Ok((worst, 1.0))
}

fn gradient_finite_difference(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let mut worst: f64 = 0.0;
    for t in 0..10 {
        let inst = gen_matrix_regression(8, 3, 1.5, 1e-3, ctx.seed * 100 + t)?;
        let mut r = rng(ctx, 14 + t);
        let x = gaussian_matrix(8, 8, &mut r);
        let d = gaussian_matrix(8, 8, &mut r);
        let h = 1e-5;
        let fd = (inst.objective(&(&x + &d * h))? - inst.objective(&(&x - &d * h))?) / (2.0 * h);
        let an = linalg::inner(&inst.gradient(&x)?, &d);
        worst = worst.max((fd - an).abs() / an.abs().max(1e-12));
    }
    Ok((worst, 1e-4))
}

fn lipschitz_upper_bound(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let inst = gen_matrix_regression(20, 5, 1.3, 1e-3, ctx.seed)?;
    let mut r = rng(ctx, 30);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = gaussian_matrix(20, 20, &mut r);
        let y = gaussian_matrix(20, 20, &mut r);
        let lhs = nuclear_norm(&(inst.gradient(&x)? - inst.gradient(&y)?));
        worst = worst.max(lhs / (inst.lipschitz_upper * spectral_norm(&(x - y))));
    }
    Ok((worst, 1.0))
}

fn heavy_tail_alpha_moment(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let mut worst: f64 = 0.0;
    for alpha in [1.5, 2.0] {
        let sigma = 0.7;
        let noise = NoiseModel::heavy_tail(sigma, alpha)?;
        let mut r = rng(ctx, 40);
        let draws = 100_000;
        let total: f64 = (0..draws)
            .map(|_| sample_noise(3, 2, &noise, &mut r).norm().powf(alpha))
            .sum();
        let target = sigma.powf(alpha);
        worst = worst.max((total / draws as f64 / target - 1.0).abs());
    }
    Ok((worst, 0.1))
}

fn zero_noise_covariance(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let m = gen_near_lowrank(&NearLowRankSpec::new(20), ctx.seed)?;
    let ns = PolarConfig::newton_schulz(5);
    let trace = empirical_sign_covariance(&m, 0.0, 5, |x: &Matrix, _: &mut Rng| newton_schulz(x, &ns), &mut rng(ctx, 41))?;
    Ok((trace, 0.0))
}

fn momentum_ignores_sketch(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let mut r = rng(ctx, 42);
    let grads: Vec<Matrix> = (0..5).map(|_| gaussian_matrix(12, 10, &mut r)).collect();
    let schedule = ScheduleParams::muon(1.5)?;
    let base = SketchSpec::gaussian(3);
    let x = Matrix::zeros(12, 10);
    let (mut a, mut b) = (MuonState::new(12, 10), MuonState::new(12, 10));
    let (mut ra, mut rb) = (seeded_rng(1), seeded_rng(2));
    let mut worst: f64 = 0.0;
    for g in &grads {
        a = step_lowrank_muon(&a, &x, g, &schedule, &RankControl::Fixed, &base, 1.0, &mut ra)?.1;
        b = step_lowrank_muon(&b, &x, g, &schedule, &RankControl::Fixed, &base, 1.0, &mut rb)?.1;
        worst = worst.max((&a.momentum - &b.momentum).abs().max());
    }
    Ok((worst, 0.0))
}

fn container_roundtrip(ctx: &InvariantContext) -> Result<(f64, f64)> {
    let m = gaussian_matrix(7, 3, &mut rng(ctx, 43));
    let mut buf = Vec::new();
    container::write(&mut buf, &[("m", &m)])?;
    let back = container::read(buf.as_slice())?;
    let same = back.len() == 1 && back[0].0 == "m" && back[0].1 == m;
    Ok((if same { 0.0 } else { 1.0 }, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrupted_sign_breaks_factorization_identity() {
        let prop = registered_properties()
            .into_iter()
            .find(|p| p.name == "factorization_identity")
            .unwrap();
        let good = evaluate(&prop, &InvariantContext::default());
        assert!(good.pass, "{good:?}");
        let bad = evaluate(
            &prop,
            &InvariantContext {
                sign: corrupted_msgn,
                seed: 0,
            },
        );
        assert!(!bad.pass, "{bad:?}");
    }

    #[test]
    fn names_are_unique() {
        let props = registered_properties();
        let mut names: Vec<_> = props.iter().map(|p| p.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), props.len());
    }
}
