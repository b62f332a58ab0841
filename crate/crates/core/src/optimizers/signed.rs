//! Matrix-signed updates `X <- X - eta_k * M_O` where `M_O` is an exact or
//! sketched matrix sign of the gradient (GD variants) or of the momentum
//! (Muon variants).

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::schedule::{ScheduleKind, ScheduleParams};
use crate::error::Result;
use crate::linalg::{self, is_zero, Matrix, PolarConfig};
use crate::orthogonalize::{safeguarded_sketch, sketch_sign, LowRankSign, SafeguardPolicy, SketchSpec};

/// How the sketch rank is chosen at each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RankControl {
    /// Always sketch at `SketchSpec::rank`.
    Fixed,
    /// Grow the rank until the residual is within the scheduled `delta_k`.
    Safeguarded(SafeguardPolicy),
}

/// `X - eta * Q S`, without forming `Q S` separately.
fn apply_low_rank(x: &Matrix, sign: &LowRankSign, eta: f64) -> Matrix {
    let mut next = x.clone();
    next.gemm(-eta, &sign.q, &sign.s, 1.0);
    next
}

/// One step of fixed-rank matrix-signed GD. A zero gradient returns `X`
/// unchanged and no sign.
pub fn step_fixed_rank_gd<R: Rng + ?Sized>(
    x: &Matrix,
    grad: &Matrix,
    k: usize,
    spec: &SketchSpec,
    lr_scale: f64,
    rng: &mut R,
) -> Result<(Matrix, Option<LowRankSign>)> {
    if is_zero(grad) {
        return Ok((x.clone(), None));
    }
    let eta = lr_scale * ScheduleParams::gd(ScheduleKind::FixedRankGd).at(k).eta;
    let sign = sketch_sign(grad, spec, rng)?;
    Ok((apply_low_rank(x, &sign, eta), Some(sign)))
}

/// One step of safeguarded matrix-signed GD: the sketch certifies
/// `||grad - Q Q^T grad||_* <= delta_k`.
pub fn step_safeguarded_gd<R: Rng + ?Sized>(
    x: &Matrix,
    grad: &Matrix,
    k: usize,
    policy: &SafeguardPolicy,
    base: &SketchSpec,
    lr_scale: f64,
    rng: &mut R,
) -> Result<(Matrix, Option<LowRankSign>)> {
    if is_zero(grad) {
        return Ok((x.clone(), None));
    }
    let s = ScheduleParams::gd(ScheduleKind::SafeguardedGd).at(k);
    let delta = s.delta.expect("safeguarded schedule emits delta");
    let sign = safeguarded_sketch(grad, delta, policy, base, rng)?;
    Ok((apply_low_rank(x, &sign, lr_scale * s.eta), Some(sign)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuonState {
    /// `M^{k-1}`; zero before the first step.
    pub momentum: Matrix,
    pub step_index: usize,
    pub last_rank_used: usize,
    pub last_residual: f64,
}

impl MuonState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            momentum: Matrix::zeros(rows, cols),
            step_index: 0,
            last_rank_used: 0,
            last_residual: f64::NAN,
        }
    }

    /// `M^k = (1 - theta_{k-1}) M^{k-1} + theta_{k-1} G`, `theta_{-1} = 1`.
    fn advance_momentum(&self, stoch_grad: &Matrix, schedule: &ScheduleParams) -> Matrix {
        let theta = schedule.momentum_weight(self.step_index);
        if theta == 1.0 {
            return stoch_grad.clone();
        }
        let mut m = self.momentum.scale(1.0 - theta);
        m += stoch_grad * theta;
        m
    }
}

/// Low-rank Muon step. Momentum is updated from the sample alone; the
/// sketch only shapes the direction.
pub fn step_lowrank_muon<R: Rng + ?Sized>(
    state: &MuonState,
    x: &Matrix,
    stoch_grad: &Matrix,
    schedule: &ScheduleParams,
    rank: &RankControl,
    base: &SketchSpec,
    lr_scale: f64,
    rng: &mut R,
) -> Result<(Matrix, MuonState)> {
    let k = state.step_index;
    let momentum = state.advance_momentum(stoch_grad, schedule);
    let s = schedule.at(k);
    let mut next_state = MuonState {
        momentum,
        step_index: k + 1,
        last_rank_used: 0,
        last_residual: f64::NAN,
    };
    if is_zero(&next_state.momentum) {
        return Ok((x.clone(), next_state));
    }
    let sign = match rank {
        RankControl::Fixed => sketch_sign(&next_state.momentum, base, rng)?,
        RankControl::Safeguarded(policy) => {
            let delta = s.delta.unwrap_or(f64::INFINITY);
            safeguarded_sketch(&next_state.momentum, delta, policy, base, rng)?
        }
    };
    next_state.last_rank_used = sign.r_used;
    next_state.last_residual = sign.residual_value();
    Ok((apply_low_rank(x, &sign, lr_scale * s.eta), next_state))
}

/// Vanilla Muon: full-matrix sign of the momentum.
pub fn step_vanilla_muon(
    state: &MuonState,
    x: &Matrix,
    stoch_grad: &Matrix,
    schedule: &ScheduleParams,
    polar: &PolarConfig,
    lr_scale: f64,
) -> Result<(Matrix, MuonState)> {
    let k = state.step_index;
    let momentum = state.advance_momentum(stoch_grad, schedule);
    let mut next_state = MuonState {
        momentum,
        step_index: k + 1,
        last_rank_used: 0,
        last_residual: f64::NAN,
    };
    if is_zero(&next_state.momentum) {
        return Ok((x.clone(), next_state));
    }
    let direction = linalg::polar_sign(&next_state.momentum, polar)?;
    next_state.last_rank_used = linalg::min_dim(&direction);
    next_state.last_residual = 0.0;
    let eta = lr_scale * schedule.at(k).eta;
    let mut next = x.clone();
    next -= &direction * eta;
    Ok((next, next_state))
}
