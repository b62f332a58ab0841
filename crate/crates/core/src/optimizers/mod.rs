//! Single-matrix optimizers.
//!
//! The step functions are pure: they take the current iterate and state and
//! return new ones. [`Optimizer`] wraps them with their state for use in a
//! loop; a model with several matrix parameters holds one instance each.

mod baselines;
mod schedule;
mod signed;
mod theory;

pub use baselines::{step_adamw, step_sgdm, AdamWConfig, AdamWState, SgdmConfig, SgdmState};
pub use schedule::{check_alpha, schedule, Schedule, ScheduleKind, ScheduleParams};
pub use signed::{
    step_fixed_rank_gd, step_lowrank_muon, step_safeguarded_gd, step_vanilla_muon, MuonState,
    RankControl,
};
pub use theory::{descent_bound, gd_rate_rhs, theory_bounds, RateBounds, TheoryBounds};

use crate::error::Result;
use crate::linalg::{Matrix, PolarConfig};
use crate::orthogonalize::{LowRankSign, SafeguardPolicy, SketchSpec};
use crate::Rng;

/// What a single step did, for logging.
#[derive(Debug, Clone, Default)]
pub struct StepReport {
    pub eta: f64,
    pub rank_used: Option<usize>,
    /// Certified `||M - Q Q^T M||_*` (or its upper bound) for sketched steps.
    pub residual: Option<f64>,
    pub skipped: bool,
    pub sign: Option<LowRankSign>,
}

#[derive(Debug, Clone)]
pub enum Optimizer {
    LowRankGd {
        spec: SketchSpec,
        lr_scale: f64,
        k: usize,
    },
    SafeguardedGd {
        policy: SafeguardPolicy,
        base: SketchSpec,
        lr_scale: f64,
        k: usize,
    },
    LowRankMuon {
        schedule: ScheduleParams,
        rank: RankControl,
        base: SketchSpec,
        lr_scale: f64,
        state: MuonState,
    },
    Muon {
        schedule: ScheduleParams,
        polar: PolarConfig,
        lr_scale: f64,
        state: MuonState,
    },
    Sgdm {
        cfg: SgdmConfig,
        state: SgdmState,
    },
    AdamW {
        cfg: AdamWConfig,
        state: AdamWState,
    },
}

impl Optimizer {
    pub fn name(&self) -> &'static str {
        match self {
            Self::LowRankGd { .. } => "lr-gd",
            Self::SafeguardedGd { .. } => "safeguarded-gd",
            Self::LowRankMuon { .. } => "lr-muon",
            Self::Muon { .. } => "muon",
            Self::Sgdm { .. } => "sgdm",
            Self::AdamW { .. } => "adamw",
        }
    }

    /// Advance `x` by one step given the (possibly stochastic) gradient.
    pub fn step(&mut self, x: &Matrix, grad: &Matrix, rng: &mut Rng) -> Result<(Matrix, StepReport)> {
        match self {
            Self::LowRankGd { spec, lr_scale, k } => {
                let eta = *lr_scale * ScheduleParams::gd(ScheduleKind::FixedRankGd).at(*k).eta;
                let (next, sign) = step_fixed_rank_gd(x, grad, *k, spec, *lr_scale, rng)?;
                *k += 1;
                Ok((next, sign_report(eta, sign)))
            }
            Self::SafeguardedGd {
                policy,
                base,
                lr_scale,
                k,
            } => {
                let eta = *lr_scale * ScheduleParams::gd(ScheduleKind::SafeguardedGd).at(*k).eta;
                let (next, sign) = step_safeguarded_gd(x, grad, *k, policy, base, *lr_scale, rng)?;
                *k += 1;
                Ok((next, sign_report(eta, sign)))
            }
            Self::LowRankMuon {
                schedule,
                rank,
                base,
                lr_scale,
                state,
            } => {
                let eta = *lr_scale * schedule.at(state.step_index).eta;
                let (next, st) = step_lowrank_muon(state, x, grad, schedule, rank, base, *lr_scale, rng)?;
                *state = st;
                Ok((next, muon_report(eta, state)))
            }
            Self::Muon {
                schedule,
                polar,
                lr_scale,
                state,
            } => {
                let eta = *lr_scale * schedule.at(state.step_index).eta;
                let (next, st) = step_vanilla_muon(state, x, grad, schedule, polar, *lr_scale)?;
                *state = st;
                Ok((next, muon_report(eta, state)))
            }
            Self::Sgdm { cfg, state } => {
                let (next, st) = step_sgdm(state, x, grad, cfg);
                *state = st;
                Ok((
                    next,
                    StepReport {
                        eta: cfg.lr,
                        ..StepReport::default()
                    },
                ))
            }
            Self::AdamW { cfg, state } => {
                let (next, st) = step_adamw(state, x, grad, cfg);
                *state = st;
                Ok((
                    next,
                    StepReport {
                        eta: cfg.lr,
                        ..StepReport::default()
                    },
                ))
            }
        }
    }
}

fn sign_report(eta: f64, sign: Option<LowRankSign>) -> StepReport {
    match sign {
        Some(s) => StepReport {
            eta,
            rank_used: Some(s.r_used),
            residual: s.residual.map(|r| r.value),
            skipped: false,
            sign: Some(s),
        },
        None => StepReport {
            eta,
            skipped: true,
            ..StepReport::default()
        },
    }
}

fn muon_report(eta: f64, state: &MuonState) -> StepReport {
    let skipped = state.last_rank_used == 0;
    StepReport {
        eta,
        rank_used: (!skipped).then_some(state.last_rank_used),
        residual: (!skipped && state.last_residual.is_finite()).then_some(state.last_residual),
        skipped,
        sign: None,
    }
}
