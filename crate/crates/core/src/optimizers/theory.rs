//! Theoretical constants and runtime-checkable inequalities.

use super::schedule::check_alpha;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryBounds {
    /// Lower bound on the objective.
    pub f_low: f64,
    /// Lipschitz constant of the gradient (nuclear norm vs. spectral norm),
    /// or any upper bound on it.
    pub l_star: f64,
    /// Heavy-tail noise scale.
    pub sigma: f64,
    /// Tail index in `(1, 2]`.
    pub alpha: f64,
    /// `min(m, n)`.
    pub rho: usize,
}

impl TheoryBounds {
    /// `U_gd = f(X^0) - f_low + L + 4`.
    pub fn u_gd(&self, f_x0: f64) -> f64 {
        f_x0 - self.f_low + self.l_star + 4.0
    }

    /// `U_mn = f(X^0) - f_low + s^a + 2L + 4 + 2(a-1)(2 sqrt(rho)/a)^{a/(a-1)}
    ///        + 6 L^a + 4 s^a`.
    pub fn u_mn(&self, f_x0: f64) -> Result<f64> {
        check_alpha(self.alpha)?;
        let a = self.alpha;
        let sa = self.sigma.powf(a);
        let rho_term = 2.0 * (a - 1.0) * (2.0 * (self.rho as f64).sqrt() / a).powf(a / (a - 1.0));
        Ok(f_x0 - self.f_low
            + sa
            + 2.0 * self.l_star
            + 4.0
            + rho_term
            + 6.0 * self.l_star.powf(a)
            + 4.0 * sa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBounds {
    /// `U_gd ln K / K^{1/2}`.
    pub gd_rhs: f64,
    /// `U_mn ln K / K^{(a-1)/(3a-2)}`.
    pub muon_rhs: f64,
}

pub fn theory_bounds(bounds: &TheoryBounds, f_x0: f64, horizon: usize) -> Result<RateBounds> {
    if horizon < 3 {
        return Err(Error::HorizonTooShort(horizon));
    }
    let k = horizon as f64;
    let a = bounds.alpha;
    Ok(RateBounds {
        gd_rhs: gd_rate_rhs(bounds.u_gd(f_x0), k),
        muon_rhs: bounds.u_mn(f_x0)? * k.ln() / k.powf((a - 1.0) / (3.0 * a - 2.0)),
    })
}

/// `U ln K / sqrt(K)` for real-valued `K`.
pub fn gd_rate_rhs(u_gd: f64, k: f64) -> f64 {
    u_gd * k.ln() / k.sqrt()
}

/// Right-hand side of the one-step descent inequality for a signed step
/// `X+ = X - eta msgn(M)`:
///
/// `f(X) - eta ||grad||_* + 2 eta ||grad - M||_* + L eta^2 / 2`.
pub fn descent_bound(f_x: f64, grad_nuclear: f64, residual_nuclear: f64, eta: f64, lipschitz: f64) -> f64 {
    f_x - eta * grad_nuclear + 2.0 * eta * residual_nuclear + 0.5 * lipschitz * eta * eta
}
