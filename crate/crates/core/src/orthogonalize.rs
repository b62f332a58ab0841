//! Low-rank orthogonalization: approximate `msgn(M)` by `Q msgn(Q^T M)` where
//! `Q` is a column-orthogonal basis for a sketched range of `M`.
//!
//! Three range finders are provided (Gaussian sketch, squared-norm column
//! sampling, and power iterations), plus a safeguard that grows the sketch
//! rank until the nuclear-norm residual `||M - Q Q^T M||_*` drops below a
//! tolerance.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ensure_nonzero, min_dim, Matrix, PolarConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SketchMethod {
    GaussianSketch,
    ColumnSelection,
    PowerIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResidualMode {
    /// `||(I - QQ^T) M||_*` from the singular values of the residual.
    ExactNuclear,
    /// `sqrt(min(m,n)) ||(I - QQ^T) M||_F`, a cheap upper bound.
    FrobeniusUpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SketchSpec {
    pub method: SketchMethod,
    pub rank: usize,
    /// Number of `(M M^T)` applications; only read by `PowerIteration`.
    pub power_q: usize,
    pub polar: PolarConfig,
    /// `None` skips residual measurement (timing runs).
    pub residual: Option<ResidualMode>,
}

impl SketchSpec {
    pub fn gaussian(rank: usize) -> Self {
        Self {
            method: SketchMethod::GaussianSketch,
            rank,
            power_q: 0,
            polar: PolarConfig::default(),
            residual: Some(ResidualMode::ExactNuclear),
        }
    }

    pub fn column_select(rank: usize) -> Self {
        Self {
            method: SketchMethod::ColumnSelection,
            ..Self::gaussian(rank)
        }
    }

    pub fn power(rank: usize, q: usize) -> Self {
        Self {
            method: SketchMethod::PowerIteration,
            power_q: q,
            ..Self::gaussian(rank)
        }
    }

    pub fn with_polar(mut self, polar: PolarConfig) -> Self {
        self.polar = polar;
        self
    }

    pub fn with_residual(mut self, residual: Option<ResidualMode>) -> Self {
        self.residual = residual;
        self
    }

    pub fn with_rank(mut self, rank: usize) -> Self {
        self.rank = rank;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub value: f64,
    pub is_upper_bound: bool,
}

/// `M_O = Q S` kept in factored form.
#[derive(Debug, Clone)]
pub struct LowRankSign {
    pub q: Matrix,
    pub s: Matrix,
    pub r_used: usize,
    pub residual: Option<Residual>,
}

impl LowRankSign {
    pub fn materialize(&self) -> Matrix {
        &self.q * &self.s
    }

    pub fn residual_value(&self) -> f64 {
        self.residual.map_or(f64::NAN, |r| r.value)
    }
}

/// Squared-column-norm sampling probabilities `p_i = ||M_(i)||^2 / ||M||_F^2`.
pub fn column_probabilities(m: &Matrix) -> Result<Vec<f64>> {
    ensure_nonzero(m)?;
    let total = m.norm_squared();
    Ok(m.column_iter().map(|c| c.norm_squared() / total).collect())
}

fn check_rank(m: &Matrix, rank: usize) -> Result<()> {
    let max = min_dim(m);
    if rank == 0 || rank > max {
        Err(Error::RankOutOfRange { rank, max })
    } else {
        Ok(())
    }
}

fn gaussian_range<R: Rng + ?Sized>(m: &Matrix, rank: usize, rng: &mut R) -> Result<Matrix> {
    let g = linalg::gaussian_matrix(m.ncols(), rank, rng);
    Ok(linalg::qr_thin(&(m * g))?.q)
}

fn power_range<R: Rng + ?Sized>(
    m: &Matrix,
    rank: usize,
    q: usize,
    rng: &mut R,
) -> Result<Matrix> {
    let mut basis = gaussian_range(m, rank, rng)?;
    // Re-orthonormalize after every multiply; the literal (MM^T)^q M G
    // loses all but the leading direction to roundoff.
    for _ in 0..q {
        let z = linalg::qr_thin(&linalg::t_mul(m, &basis))?.q;
        basis = linalg::qr_thin(&(m * z))?.q;
    }
    Ok(basis)
}

fn column_range<R: Rng + ?Sized>(m: &Matrix, rank: usize, rng: &mut R) -> Result<Matrix> {
    let probs = column_probabilities(m)?;
    let picker = WeightedIndex::new(&probs)
        .map_err(|e| Error::InvalidArgument(format!("column sampling: {e}")))?;
    let mut c = Matrix::zeros(m.nrows(), rank);
    for t in 0..rank {
        let i = picker.sample(rng);
        let scale = 1.0 / (rank as f64 * probs[i]).sqrt();
        c.set_column(t, &(m.column(i) * scale));
    }
    Ok(linalg::qr_thin(&c)?.q)
}

/// `(I - QQ^T) M` measured per `mode`.
pub fn residual_nuclear(m: &Matrix, q: &Matrix, mode: ResidualMode) -> Residual {
    let proj = q * linalg::t_mul(q, m);
    let r = m - proj;
    match mode {
        ResidualMode::ExactNuclear => Residual {
            value: linalg::nuclear_norm(&r),
            is_upper_bound: false,
        },
        ResidualMode::FrobeniusUpperBound => Residual {
            value: (min_dim(m) as f64).sqrt() * r.norm(),
            is_upper_bound: true,
        },
    }
}

fn finish(m: &Matrix, q: Matrix, spec: &SketchSpec) -> Result<LowRankSign> {
    if q.ncols() == 0 {
        return Err(Error::InvalidArgument(
            "sketch captured no part of range(M)".into(),
        ));
    }
    let s = linalg::polar_sign(&linalg::t_mul(&q, m), &spec.polar)?;
    let residual = spec.residual.map(|mode| residual_nuclear(m, &q, mode));
    Ok(LowRankSign {
        r_used: q.ncols(),
        q,
        s,
        residual,
    })
}

/// Gaussian sketch: `Q = qr(M G)`, `G ~ N(0,1)^{n x r}`.
pub fn sketch_sign_gaussian<R: Rng + ?Sized>(
    m: &Matrix,
    spec: &SketchSpec,
    rng: &mut R,
) -> Result<LowRankSign> {
    ensure_nonzero(m)?;
    check_rank(m, spec.rank)?;
    let q = gaussian_range(m, spec.rank, rng)?;
    finish(m, q, spec)
}

/// Column selection: sample `r` columns with replacement proportional to their
/// squared norms, rescale each by `1/sqrt(r p_i)`, and orthonormalize.
pub fn sketch_sign_column_select<R: Rng + ?Sized>(
    m: &Matrix,
    spec: &SketchSpec,
    rng: &mut R,
) -> Result<LowRankSign> {
    ensure_nonzero(m)?;
    check_rank(m, spec.rank)?;
    let q = column_range(m, spec.rank, rng)?;
    finish(m, q, spec)
}

/// Power-iteration sketch: `Q` spans `(M M^T)^q M G`. With `q = 0` this is
/// exactly [`sketch_sign_gaussian`], draw for draw.
pub fn sketch_sign_power<R: Rng + ?Sized>(
    m: &Matrix,
    spec: &SketchSpec,
    rng: &mut R,
) -> Result<LowRankSign> {
    ensure_nonzero(m)?;
    check_rank(m, spec.rank)?;
    let q = power_range(m, spec.rank, spec.power_q, rng)?;
    finish(m, q, spec)
}

pub fn sketch_sign<R: Rng + ?Sized>(
    m: &Matrix,
    spec: &SketchSpec,
    rng: &mut R,
) -> Result<LowRankSign> {
    match spec.method {
        SketchMethod::GaussianSketch => sketch_sign_gaussian(m, spec, rng),
        SketchMethod::ColumnSelection => sketch_sign_column_select(m, spec, rng),
        SketchMethod::PowerIteration => sketch_sign_power(m, spec, rng),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeguardPolicy {
    pub r0: usize,
    pub growth_factor: f64,
    /// Extra draws at a rank level before growing.
    pub max_redraws: usize,
    pub residual_mode: ResidualMode,
}

impl SafeguardPolicy {
    pub fn new(r0: usize) -> Self {
        Self {
            r0,
            growth_factor: 2.0,
            max_redraws: 1,
            residual_mode: ResidualMode::ExactNuclear,
        }
    }

    pub fn with_residual_mode(mut self, mode: ResidualMode) -> Self {
        self.residual_mode = mode;
        self
    }

    /// Trial ranks `r0, ceil(g r0), ...`, strictly increasing, ending at `max`.
    pub fn rank_ladder(&self, max: usize) -> Vec<usize> {
        let mut r = self.r0.clamp(1, max);
        let mut out = vec![r];
        while r < max {
            let grown = (self.growth_factor * r as f64).ceil() as usize;
            r = grown.max(r + 1).min(max);
            out.push(r);
        }
        out
    }
}

impl Default for SafeguardPolicy {
    fn default() -> Self {
        Self::new(1)
    }
}

/// Sketch with increasing rank until `residual <= delta`.
///
/// Each rank level gets `1 + max_redraws` draws. The full-rank level is
/// accepted unconditionally: there `Q` spans `range(M)` and the residual is
/// zero up to roundoff.
pub fn safeguarded_sketch<R: Rng + ?Sized>(
    m: &Matrix,
    delta: f64,
    policy: &SafeguardPolicy,
    base: &SketchSpec,
    rng: &mut R,
) -> Result<LowRankSign> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "safeguard tolerance must be positive, got {delta}"
        )));
    }
    if !(policy.growth_factor > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "growth factor must exceed 1, got {}",
            policy.growth_factor
        )));
    }
    ensure_nonzero(m)?;
    let max = min_dim(m);
    let ladder = policy.rank_ladder(max);
    let mut spec = base.with_residual(Some(policy.residual_mode));
    let mut last = None;
    for &rank in &ladder {
        spec.rank = rank;
        for _ in 0..=policy.max_redraws {
            let sign = sketch_sign(m, &spec, rng)?;
            if rank == max || sign.residual_value() <= delta {
                return Ok(sign);
            }
            last = Some(sign);
        }
    }
    // Unreachable: the ladder always ends at `max`.
    last.ok_or_else(|| Error::InvalidArgument("empty rank ladder".into()))
}
