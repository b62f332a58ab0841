//! Elementwise baselines: heavy-ball SGD and AdamW.

use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdmConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdmConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            momentum: 0.9,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdmState {
    pub buffer: Matrix,
}

impl SgdmState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            buffer: Matrix::zeros(rows, cols),
        }
    }
}

/// Heavy-ball step:
///
/// ```text
/// d = g + wd * X
/// b = mu * b + d
/// X = X - lr * b
/// ```
pub fn step_sgdm(
    state: &SgdmState,
    x: &Matrix,
    grad: &Matrix,
    cfg: &SgdmConfig,
) -> (Matrix, SgdmState) {
    let mut d = grad.clone();
    if cfg.weight_decay != 0.0 {
        d += x * cfg.weight_decay;
    }
    let mut buffer = state.buffer.scale(cfg.momentum);
    buffer += d;
    let mut next = x.clone();
    next -= &buffer * cfg.lr;
    (next, SgdmState { buffer })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub m: Matrix,
    pub v: Matrix,
    /// Number of completed steps.
    pub t: u32,
}

impl AdamWState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            t: 0,
        }
    }
}

/// Decoupled-weight-decay Adam:
///
/// ```text
/// m = b1 m + (1 - b1) g          v = b2 v + (1 - b2) g^2
/// m_hat = m / (1 - b1^t)         v_hat = v / (1 - b2^t)
/// X = (1 - lr wd) X - lr m_hat / (sqrt(v_hat) + eps)
/// ```
pub fn step_adamw(
    state: &AdamWState,
    x: &Matrix,
    grad: &Matrix,
    cfg: &AdamWConfig,
) -> (Matrix, AdamWState) {
    let t = state.t + 1;
    let m = state.m.zip_map(grad, |m, g| cfg.beta1 * m + (1.0 - cfg.beta1) * g);
    let v = state.v.zip_map(grad, |v, g| cfg.beta2 * v + (1.0 - cfg.beta2) * g * g);
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    let decay = 1.0 - cfg.lr * cfg.weight_decay;
    let mut next = x.scale(decay);
    for ((xi, mi), vi) in next.iter_mut().zip(m.iter()).zip(v.iter()) {
        *xi -= cfg.lr * (mi / c1) / ((vi / c2).sqrt() + cfg.eps);
    }
    (next, AdamWState { m, v, t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;
    use crate::seeded_rng;
    use approx::assert_relative_eq;

    #[test]
    fn sgd_without_momentum_is_plain_gradient_step() {
        let mut rng = seeded_rng(1);
        let x = gaussian_matrix(3, 3, &mut rng);
        let g = gaussian_matrix(3, 3, &mut rng);
        let cfg = SgdmConfig {
            lr: 0.1,
            momentum: 0.0,
            weight_decay: 0.0,
        };
        let (next, _) = step_sgdm(&SgdmState::new(3, 3), &x, &g, &cfg);
        assert!((next - (&x - &g * 0.1)).abs().max() < 1e-15);
    }

    #[test]
    fn sgdm_second_displacement_is_one_point_nine() {
        let g = Matrix::from_element(2, 2, 1.5);
        let x0 = Matrix::zeros(2, 2);
        let cfg = SgdmConfig {
            lr: 0.01,
            momentum: 0.9,
            weight_decay: 0.0,
        };
        let (x1, s1) = step_sgdm(&SgdmState::new(2, 2), &x0, &g, &cfg);
        let (x2, _) = step_sgdm(&s1, &x1, &g, &cfg);
        for (a, b) in x2.iter().zip(x1.iter()) {
            assert_relative_eq!(b - a, 0.01 * 1.5 * 1.9, max_relative = 1e-12);
        }
    }

    #[test]
    fn sgdm_zero_lr_is_no_op() {
        let x = Matrix::identity(2, 2);
        let cfg = SgdmConfig {
            lr: 0.0,
            ..SgdmConfig::default()
        };
        let (next, _) = step_sgdm(&SgdmState::new(2, 2), &x, &Matrix::from_element(2, 2, 3.0), &cfg);
        assert_eq!(next, x);
    }

    #[test]
    fn adamw_constant_gradient_steps_approach_lr_sign() {
        let g = Matrix::from_row_slice(1, 3, &[2.0, -0.5, 1e-2]);
        let cfg = AdamWConfig::default();
        let mut x = Matrix::zeros(1, 3);
        let mut st = AdamWState::new(1, 3);
        let mut last = x.clone();
        for _ in 0..5000 {
            last = x.clone();
            (x, st) = step_adamw(&st, &x, &g, &cfg);
        }
        let step = &last - &x;
        for (s, gi) in step.iter().zip(g.iter()) {
            assert_relative_eq!(*s, cfg.lr * gi.signum(), max_relative = 1e-4);
        }
    }

    #[test]
    fn adamw_zero_gradient_and_decay() {
        let x = Matrix::from_element(2, 2, 4.0);
        let zero = Matrix::zeros(2, 2);
        let (next, _) = step_adamw(&AdamWState::new(2, 2), &x, &zero, &AdamWConfig::default());
        assert_eq!(next, x);

        let cfg = AdamWConfig {
            lr: 0.1,
            weight_decay: 0.5,
            ..AdamWConfig::default()
        };
        let (next, _) = step_adamw(&AdamWState::new(2, 2), &x, &zero, &cfg);
        for v in next.iter() {
            assert_relative_eq!(*v, 4.0 * (1.0 - 0.05), max_relative = 1e-14);
        }
    }
}
