//! Model parameters in the natural and working parametrizations.
//!
//! The natural scale carries `(sigma, rho)`; the working scale carries
//! `(rho_tilde, sigma_tilde_sq)` with `sigma_tilde_sq = sigma^2 (1 - rho^2)`
//! and `rho_tilde = rho * sigma`. Every Gibbs conditional is closed-form on
//! the working scale; reporting happens on the natural scale.

use nalgebra::DVector;

use crate::dist::{norm_logcdf, norm_logpdf};
use crate::error::{Error, Result};

/// Parameters on the natural scale.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalParams {
    pub alpha0: f64,
    pub alpha: DVector<f64>,
    pub beta0: f64,
    pub beta: DVector<f64>,
    pub sigma: f64,
    pub rho: f64,
}

impl NaturalParams {
    pub fn new(
        alpha0: f64,
        alpha: DVector<f64>,
        beta0: f64,
        beta: DVector<f64>,
        sigma: f64,
        rho: f64,
    ) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid_param(format!("sigma must be positive, got {sigma}")));
        }
        if !(rho.abs() < 1.0) {
            return Err(Error::invalid_param(format!("rho must lie in (-1, 1), got {rho}")));
        }
        Ok(NaturalParams {
            alpha0,
            alpha,
            beta0,
            beta,
            sigma,
            rho,
        })
    }

    /// Null parameters: all coefficients zero, sigma 1, rho 0.
    pub fn null(p: usize, q: usize) -> Self {
        NaturalParams {
            alpha0: 0.0,
            alpha: DVector::zeros(q),
            beta0: 0.0,
            beta: DVector::zeros(p),
            sigma: 1.0,
            rho: 0.0,
        }
    }
}

/// Parameters on the working scale.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingParams {
    pub alpha0: f64,
    pub alpha: DVector<f64>,
    pub beta0: f64,
    pub beta: DVector<f64>,
    pub rho_tilde: f64,
    pub sigma_tilde_sq: f64,
}

/// sigma_tilde_sq = sigma^2 (1 - rho^2), rho_tilde = rho sigma.
pub fn to_working(np: &NaturalParams) -> WorkingParams {
    WorkingParams {
        alpha0: np.alpha0,
        alpha: np.alpha.clone(),
        beta0: np.beta0,
        beta: np.beta.clone(),
        rho_tilde: np.rho * np.sigma,
        sigma_tilde_sq: np.sigma * np.sigma * (1.0 - np.rho * np.rho),
    }
}

/// sigma^2 = sigma_tilde_sq + rho_tilde^2, rho = rho_tilde / sigma.
pub fn to_natural(wp: &WorkingParams) -> NaturalParams {
    let sigma_sq = wp.sigma_tilde_sq + wp.rho_tilde * wp.rho_tilde;
    let sigma = sigma_sq.sqrt();
    NaturalParams {
        alpha0: wp.alpha0,
        alpha: wp.alpha.clone(),
        beta0: wp.beta0,
        beta: wp.beta.clone(),
        sigma,
        rho: wp.rho_tilde / sigma,
    }
}

/// Inverse Mills ratio, `lambda(t) = phi(t) / Phi(t)`, evaluated in log space
/// for `t < -6` where the direct ratio degenerates to 0/0.
pub fn inverse_mills(t: f64) -> f64 {
    if t < -6.0 {
        (norm_logpdf(t) - norm_logcdf(t)).exp()
    } else {
        crate::dist::norm_pdf(t) / crate::dist::norm_cdf(t)
    }
}
