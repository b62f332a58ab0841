use rand::Rng;
use rand_distr::{Distribution, Pareto};
use serde::{Deserialize, Serialize};

use super::regression::MatrixRegressionInstance;
use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, random_orthonormal, Matrix};
use crate::optimizers::check_alpha;
use crate::seeded_rng;

/// Square test matrix with a flat head of large singular values and a flat
/// tail of small ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NearLowRankSpec {
    pub n: usize,
    pub head_frac: f64,
    pub head_value: f64,
    pub tail_value: f64,
    /// Entrywise variance of the additive noise used by the robustness study.
    pub noise_var: f64,
}

impl NearLowRankSpec {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            head_frac: 0.1,
            head_value: 1.0,
            tail_value: 1e-4,
            noise_var: 1.0,
        }
    }

    pub fn head_count(&self) -> usize {
        (self.head_frac * self.n as f64).floor() as usize
    }
}

/// `U diag(head.., tail..) V^T` with Haar-random orthogonal `U`, `V`.
pub fn gen_near_lowrank(spec: &NearLowRankSpec, seed: u64) -> Result<Matrix> {
    if !(spec.head_frac > 0.0 && spec.head_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "head_frac must lie in (0, 1), got {}",
            spec.head_frac
        )));
    }
    let n = spec.n;
    let mut rng = seeded_rng(seed);
    let head = spec.head_count();
    let mut u = random_orthonormal(n, n, &mut rng);
    let v = random_orthonormal(n, n, &mut rng);
    for j in 0..n {
        let s = if j < head { spec.head_value } else { spec.tail_value };
        u.column_mut(j).scale_mut(s);
    }
    Ok(u * v.transpose())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseKind {
    None,
    /// I.i.d. normal entries with `E ||Z||_F^2 = sigma^2`.
    GaussianFrobenius,
    /// `Z = R D` with `D` uniform on the unit Frobenius sphere and `R` a
    /// Pareto-tailed radius calibrated to `E[R^alpha] = sigma^alpha`.
    HeavyTailPareto,
}

/// Radius law for the heavy-tailed model: `R = s W`, where `W = 1` with
/// probability `1 - TAIL_WEIGHT` and `W ~ Pareto(1, beta)` otherwise.
pub const TAIL_WEIGHT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub alpha: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            sigma: 0.0,
            alpha: 2.0,
        }
    }

    pub fn gaussian(sigma: f64) -> Self {
        Self {
            kind: NoiseKind::GaussianFrobenius,
            sigma,
            alpha: 2.0,
        }
    }

    pub fn heavy_tail(sigma: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            kind: NoiseKind::HeavyTailPareto,
            sigma,
            alpha,
        })
    }

    /// Pareto shape of the tail component. For `alpha < 2` it is 2, so the
    /// radius has a finite `alpha`-moment and an infinite second moment.
    pub fn tail_shape(&self) -> f64 {
        if self.alpha < 2.0 {
            2.0
        } else {
            4.0
        }
    }

    /// `E[W^alpha]` of the unscaled radius.
    pub fn unit_radius_moment(&self) -> f64 {
        let beta = self.tail_shape();
        (1.0 - TAIL_WEIGHT) + TAIL_WEIGHT * beta / (beta - self.alpha)
    }

    /// Scale `s` with `E[(s W)^alpha] = sigma^alpha`.
    pub fn radius_scale(&self) -> f64 {
        self.sigma / self.unit_radius_moment().powf(1.0 / self.alpha)
    }

    pub fn sample_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let w = if rng.random::<f64>() < TAIL_WEIGHT {
            Pareto::new(1.0, self.tail_shape())
                .expect("valid Pareto parameters")
                .sample(rng)
        } else {
            1.0
        };
        self.radius_scale() * w
    }
}

pub fn sample_noise<R: Rng + ?Sized>(rows: usize, cols: usize, noise: &NoiseModel, rng: &mut R) -> Matrix {
    match noise.kind {
        NoiseKind::None => Matrix::zeros(rows, cols),
        NoiseKind::GaussianFrobenius => {
            let sd = noise.sigma / ((rows * cols) as f64).sqrt();
            gaussian_matrix(rows, cols, rng) * sd
        }
        NoiseKind::HeavyTailPareto => {
            let mut d = gaussian_matrix(rows, cols, rng);
            let norm = d.norm();
            let r = noise.sample_radius(rng);
            d.scale_mut(r / norm);
            d
        }
    }
}

/// `grad f(X) + Z`, `Z` drawn from `noise`.
pub fn sample_stoch_grad<R: Rng + ?Sized>(
    inst: &MatrixRegressionInstance,
    x: &Matrix,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Matrix> {
    let mut g = inst.gradient(x)?;
    if noise.kind != NoiseKind::None {
        g += sample_noise(g.nrows(), g.ncols(), noise, rng);
    }
    Ok(g)
}

/// Trace of the empirical covariance of `estimator(M + N)` over `trials`
/// draws of `N` with i.i.d. `N(0, noise_var)` entries:
/// `sum_t ||est_t - mean||_F^2 / (trials - 1)`.
pub fn empirical_sign_covariance<R, F>(
    m: &Matrix,
    noise_var: f64,
    trials: usize,
    mut estimator: F,
    rng: &mut R,
) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(&Matrix, &mut R) -> Result<Matrix>,
{
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    let sd = noise_var.sqrt();
    let mut mean = Matrix::zeros(m.nrows(), m.ncols());
    let mut m2 = 0.0;
    for t in 0..trials {
        let noisy = if sd > 0.0 {
            m + gaussian_matrix(m.nrows(), m.ncols(), rng) * sd
        } else {
            m.clone()
        };
        let est = estimator(&noisy, rng)?;
        // Welford update on the Frobenius inner product.
        let before = &est - &mean;
        mean += &before / (t + 1) as f64;
        m2 += before.dot(&(&est - &mean));
    }
    Ok((m2 / (trials - 1) as f64).max(0.0))
}
