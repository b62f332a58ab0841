//! Closed-form step, momentum-weight and tolerance sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleKind {
    /// `eta_k = (k+1)^{-1/2}`.
    FixedRankGd,
    /// `eta_k = delta_k = (k+1)^{-1/2}`.
    SafeguardedGd,
    /// `eta_k = (k+1)^{-(2a-1)/(3a-2)}`, `theta_k = (k+1)^{-a/(3a-2)}`,
    /// `delta_k = (k+1)^{-(a-1)/(3a-2)}` for tail index `a`.
    MuonHeavyTail,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub eta: f64,
    pub theta: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub kind: ScheduleKind,
    pub alpha: f64,
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

impl ScheduleParams {
    pub fn new(kind: ScheduleKind, alpha: f64) -> Result<Self> {
        if kind == ScheduleKind::MuonHeavyTail {
            check_alpha(alpha)?;
        }
        Ok(Self { kind, alpha })
    }

    pub fn gd(kind: ScheduleKind) -> Self {
        Self { kind, alpha: 2.0 }
    }

    pub fn muon(alpha: f64) -> Result<Self> {
        Self::new(ScheduleKind::MuonHeavyTail, alpha)
    }

    pub fn at(&self, k: usize) -> Schedule {
        let base = (k + 1) as f64;
        match self.kind {
            ScheduleKind::FixedRankGd => Schedule {
                eta: base.powf(-0.5),
                theta: None,
                delta: None,
            },
            ScheduleKind::SafeguardedGd => {
                let v = base.powf(-0.5);
                Schedule {
                    eta: v,
                    theta: None,
                    delta: Some(v),
                }
            }
            ScheduleKind::MuonHeavyTail => {
                let a = self.alpha;
                let denom = 3.0 * a - 2.0;
                Schedule {
                    eta: base.powf(-(2.0 * a - 1.0) / denom),
                    theta: Some(base.powf(-a / denom)),
                    delta: Some(base.powf(-(a - 1.0) / denom)),
                }
            }
        }
    }

    /// Momentum weight applied at step `k`, i.e. `theta_{k-1}` with
    /// `theta_{-1} = 1`.
    pub fn momentum_weight(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.at(k - 1).theta.unwrap_or(1.0)
        }
    }
}

pub fn schedule(kind: ScheduleKind, alpha: f64, k: usize) -> Result<Schedule> {
    Ok(ScheduleParams::new(kind, alpha)?.at(k))
}
