//! Dense kernels: thin QR, reduced SVD, matrix sign, Newton–Schulz polar
//! approximation, norms, best rank-k truncation and Gaussian test matrices.
//!
//! Everything operates on [`Matrix`], a dynamically sized column-major
//! `f64` matrix (nalgebra). QR and SVD are computed by faer on a copy; the
//! numerical-rank conventions and the sign/polar logic live here.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Relative cutoff for numerical rank, applied to SVD and pivoted-QR diagonals.
pub const RANK_TOL: f64 = 1e-12;

pub(crate) fn ensure_finite(m: &Matrix) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub(crate) fn ensure_nonzero(m: &Matrix) -> Result<()> {
    ensure_finite(m)?;
    if m.iter().any(|&x| x != 0.0) {
        Ok(())
    } else {
        Err(Error::ZeroMatrix)
    }
}

pub fn is_zero(m: &Matrix) -> bool {
    m.iter().all(|&x| x == 0.0)
}

/// `min(rows, cols)`.
pub fn min_dim(m: &Matrix) -> usize {
    m.nrows().min(m.ncols())
}

/// `A^T B`. nalgebra's `tr_mul` forms each entry as a column dot product,
/// which is an order of magnitude slower than a blocked product on large
/// inputs, so the transpose is materialized first.
pub fn t_mul(a: &Matrix, b: &Matrix) -> Matrix {
    a.transpose() * b
}

/// Trace inner product `<A, B>`.
pub fn inner(a: &Matrix, b: &Matrix) -> f64 {
    a.dot(b)
}

/// Column-orthogonal factor of a thin QR, truncated to the numerical rank.
#[derive(Debug, Clone)]
pub struct ThinQr {
    pub q: Matrix,
    /// Numerical rank detected from the pivoted `R` diagonal.
    pub rank: usize,
    /// Width that was asked for (the input's column count).
    pub requested: usize,
}

impl ThinQr {
    pub fn is_deficient(&self) -> bool {
        self.rank < self.requested
    }
}

/// Thin QR of an `m x k` matrix with `k <= m`.
///
/// Uses Householder QR with column pivoting so that a rank-deficient input
/// yields a narrower `Q` whose columns still span `range(M)`; the number of
/// retained columns is the count of `|R_ii| > RANK_TOL * |R_00|`.
pub fn qr_thin(m: &Matrix) -> Result<ThinQr> {
    let (rows, k) = m.shape();
    if k > rows {
        return Err(Error::InvalidArgument(format!(
            "qr_thin needs cols <= rows, got {rows}x{k}"
        )));
    }
    ensure_finite(m)?;
    if k == 0 {
        return Ok(ThinQr {
            q: Matrix::zeros(rows, 0),
            rank: 0,
            requested: 0,
        });
    }
    let qr = to_faer(m).col_piv_qr();
    let r = qr.thin_R();
    let lead = r[(0, 0)].abs();
    let rank = if lead == 0.0 {
        0
    } else {
        (0..k)
            .take_while(|&i| r[(i, i)].abs() > RANK_TOL * lead)
            .count()
    };
    let q = qr.compute_thin_Q();
    Ok(ThinQr {
        q: Matrix::from_fn(rows, rank, |i, j| q[(i, j)]),
        rank,
        requested: k,
    })
}

fn to_faer(m: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Reduced SVD `U diag(sigma) V^T` truncated at the numerical rank.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

pub fn svd_reduced(m: &Matrix) -> Result<SvdFactors> {
    ensure_nonzero(m)?;
    let svd = to_faer(m).thin_svd().map_err(|_| Error::NoConvergence)?;
    let (u, v) = (svd.U(), svd.V());
    let sv: Vec<f64> = svd.S().column_vector().iter().copied().collect();

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let top = sv[order[0]];
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| sv[i] > RANK_TOL * top)
        .collect();

    Ok(SvdFactors {
        sigma: keep.iter().map(|&i| sv[i]).collect(),
        u: Matrix::from_fn(m.nrows(), keep.len(), |r, c| u[(r, keep[c])]),
        v: Matrix::from_fn(m.ncols(), keep.len(), |r, c| v[(r, keep[c])]),
    })
}

/// Singular values in nonincreasing order (no vectors computed). Zero input
/// gives all zeros.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if is_zero(m) {
        return vec![0.0; min_dim(m)];
    }
    let mut sv = to_faer(m)
        .singular_values()
        .unwrap_or_else(|_| m.clone().singular_values().iter().copied().collect());
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// `msgn(M) = U V^T` from the reduced SVD.
pub fn msgn_exact(m: &Matrix) -> Result<Matrix> {
    let f = svd_reduced(m)?;
    Ok(&f.u * f.v.transpose())
}

/// Odd quintic `p(x) = a x + b x^3 + c x^5` applied to singular values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NsCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl NsCoefficients {
    /// Classical quintic Newton–Schulz: fixed point at 1 with `p'(1) = p''(1) = 0`.
    /// Converges on `(0, 1]` without overshoot.
    pub const CONVERGENT: Self = Self {
        a: 1.875,
        b: -1.25,
        c: 0.375,
    };

    /// Tuned quintic used by the Muon reference. Faster initial growth, but
    /// singular values settle in a band around 0.7..1.2 instead of at 1.
    pub const MUON: Self = Self {
        a: 3.4445,
        b: -4.7750,
        c: 2.0315,
    };

    pub fn eval(&self, x: f64) -> f64 {
        let x2 = x * x;
        x * (self.a + x2 * (self.b + self.c * x2))
    }
}

impl Default for NsCoefficients {
    fn default() -> Self {
        Self::CONVERGENT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolarMethod {
    ExactSvd,
    NewtonSchulz,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarConfig {
    pub method: PolarMethod,
    pub ns_steps: usize,
    pub ns_eps: f64,
    pub coefficients: NsCoefficients,
}

impl Default for PolarConfig {
    fn default() -> Self {
        Self {
            method: PolarMethod::ExactSvd,
            ns_steps: 5,
            ns_eps: 1e-7,
            coefficients: NsCoefficients::default(),
        }
    }
}

impl PolarConfig {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn newton_schulz(steps: usize) -> Self {
        Self {
            method: PolarMethod::NewtonSchulz,
            ns_steps: steps,
            ..Self::default()
        }
    }
}

/// Newton–Schulz approximation of `msgn(M)`.
///
/// Runs on `M / (||M||_F + ns_eps)`. The iteration is carried out on the
/// orientation with fewer rows so the Gram matrix is `min(m,n)` square; with
/// `W` the tall orientation, each step is `W <- a W + W (b G + c G^2)` where
/// `G = W^T W`.
pub fn newton_schulz(m: &Matrix, cfg: &PolarConfig) -> Result<Matrix> {
    ensure_nonzero(m)?;
    if cfg.ns_steps == 0 {
        return Err(Error::InvalidArgument("ns_steps must be >= 1".into()));
    }
    let coef = cfg.coefficients;
    let wide = m.nrows() <= m.ncols();
    let mut w = if wide { m.transpose() } else { m.clone() };
    let scale = 1.0 / (w.norm() + cfg.ns_eps);
    w.scale_mut(scale);

    let k = w.ncols();
    let mut gram = Matrix::zeros(k, k);
    let mut poly = Matrix::zeros(k, k);
    let mut next = w.clone();
    for _ in 0..cfg.ns_steps {
        let wt = w.transpose();
        gram.gemm(1.0, &wt, &w, 0.0);
        // poly = b G + c G^2
        poly.copy_from(&gram);
        poly.gemm(coef.c, &gram, &gram, coef.b);
        next.copy_from(&w);
        next.gemm(1.0, &w, &poly, coef.a);
        std::mem::swap(&mut w, &mut next);
    }
    Ok(if wide { w.transpose() } else { w })
}

/// Polar sign per the configured method.
pub fn polar_sign(m: &Matrix, cfg: &PolarConfig) -> Result<Matrix> {
    match cfg.method {
        PolarMethod::ExactSvd => msgn_exact(m),
        PolarMethod::NewtonSchulz => newton_schulz(m, cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub spectral: f64,
    pub nuclear: f64,
    pub frobenius: f64,
}

pub fn norms(m: &Matrix) -> Norms {
    let sv = singular_values(m);
    Norms {
        spectral: sv.first().copied().unwrap_or(0.0),
        nuclear: sv.iter().sum(),
        frobenius: m.norm(),
    }
}

pub fn spectral_norm(m: &Matrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn nuclear_norm(m: &Matrix) -> f64 {
    singular_values(m).iter().sum()
}

/// Best rank-`k` approximation `[M]_k` in Frobenius norm.
pub fn best_rank_k(m: &Matrix, k: usize) -> Result<Matrix> {
    let max = min_dim(m);
    if k == 0 || k > max {
        return Err(Error::RankOutOfRange { rank: k, max });
    }
    ensure_finite(m)?;
    if is_zero(m) {
        return Ok(m.clone());
    }
    let mut f = svd_reduced(m)?;
    let keep = k.min(f.rank());
    f.u = f.u.columns(0, keep).into_owned();
    f.v = f.v.columns(0, keep).into_owned();
    f.sigma.truncate(keep);
    Ok(f.reconstruct())
}

/// Matrix with i.i.d. standard normal entries, filled column by column.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random `n x k` matrix with orthonormal columns (QR of a Gaussian draw).
pub fn random_orthonormal<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Matrix {
    assert!(k <= n, "cannot draw {k} orthonormal columns in R^{n}");
    loop {
        let g = gaussian_matrix(n, k, rng);
        if let Ok(qr) = qr_thin(&g) {
            if qr.rank == k {
                return qr.q;
            }
        }
    }
}
