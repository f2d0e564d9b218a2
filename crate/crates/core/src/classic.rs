//! Two-point closed-form estimator of `(σ, α)` and the adaptive increment
//! order `k̂`.

use serde::{Deserialize, Serialize};

use crate::contrast::{Diagnostics, EstimateResult};
use crate::error::{LfsmError, Result};
use crate::model::kernel_alpha_norm;
use crate::scalar::Real;
use crate::stats::{emp_charfn_grid, estimate_hurst, SamplePath};

/// Largest order returned by [`k_from_alpha`].
pub const MAX_K_HAT: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointConfig<T = f64> {
    pub t1: T,
    pub t2: T,
    pub p: T,
    pub k: u32,
}

impl<T: Real> Default for TwoPointConfig<T> {
    fn default() -> Self {
        Self {
            t1: T::one(),
            t2: T::of(2.0),
            p: T::of(-0.4),
            k: 2,
        }
    }
}

impl<T: Real> TwoPointConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > T::zero() && self.t1 < self.t2 && self.t2.is_finite()) {
            return Err(LfsmError::Config(format!(
                "need 0 < t1 < t2, got t1={}, t2={}",
                self.t1, self.t2
            )));
        }
        if self.k == 0 {
            return Err(LfsmError::Config("k must be positive".into()));
        }
        Ok(())
    }
}

fn log_domain<T: Real>(phi: T) -> Result<T> {
    if phi > T::zero() && phi < T::one() {
        Ok((-phi.ln()).ln())
    } else {
        Err(LfsmError::EstimationFailed(format!(
            "characteristic function value {phi} outside (0, 1)"
        )))
    }
}

/// `α = (log|log φ(t₂)| - log|log φ(t₁)|) / (log t₂ - log t₁)`.
pub fn closed_form_alpha<T: Real>(phi1: T, phi2: T, t1: T, t2: T) -> Result<T> {
    let (l1, l2) = (log_domain(phi1)?, log_domain(phi2)?);
    Ok((l2 - l1) / (t2.ln() - t1.ln()))
}

/// `σ = (-log φ(t₁))^{1/α} / (t₁ ‖h_k‖_α)`.
pub fn closed_form_sigma<T: Real>(phi1: T, t1: T, alpha: T, hurst: T, k: u32) -> Result<T> {
    log_domain(phi1)?;
    if !(alpha > T::zero() && alpha < T::of(2.0)) {
        return Err(LfsmError::EstimationFailed(format!(
            "alpha {alpha} outside (0, 2)"
        )));
    }
    let norm = kernel_alpha_norm(k, alpha.to_f64_lossy(), hurst.to_f64_lossy())
        .map_err(|e| LfsmError::EstimationFailed(e.to_string()))?;
    Ok((-phi1.ln()).powf(alpha.recip()) / (t1 * T::of(norm)))
}

/// `(σ, α)` from the characteristic function at `t₁ < t₂` and a given `H`.
pub fn invert_two_point<T: Real>(
    phi1: T,
    phi2: T,
    hurst: T,
    cfg: &TwoPointConfig<T>,
) -> Result<(T, T)> {
    let alpha = closed_form_alpha(phi1, phi2, cfg.t1, cfg.t2)?;
    let sigma = closed_form_sigma(phi1, cfg.t1, alpha, hurst, cfg.k)?;
    Ok((sigma, alpha))
}

/// The two-point estimator with `H_n(p, k)` plugged in. Failures are
/// reported through `failed`; only malformed input is an error.
pub fn estimate_classic<T: Real>(
    path: &SamplePath<T>,
    cfg: &TwoPointConfig<T>,
) -> Result<EstimateResult<T>> {
    cfg.validate()?;
    let hurst = estimate_hurst(path, cfg.p, cfg.k)?;
    let phi = emp_charfn_grid(path, &[cfg.t1, cfg.t2], cfg.k)?;
    let mut result = EstimateResult {
        sigma: T::nan(),
        alpha: T::nan(),
        hurst: hurst.value,
        objective: T::zero(),
        iterations: 0,
        converged: true,
        failed: true,
        diagnostics: Diagnostics {
            hurst_out_of_range: hurst.out_of_range,
            ..Diagnostics::default()
        },
    };
    let Ok(alpha) = closed_form_alpha(phi[0], phi[1], cfg.t1, cfg.t2) else {
        return Ok(result);
    };
    result.alpha = alpha;
    if let Ok(sigma) = closed_form_sigma(phi[0], cfg.t1, alpha, hurst.value, cfg.k) {
        result.sigma = sigma;
        result.failed = false;
    }
    Ok(result)
}

/// `k̂ = 2 + ⌊1/α⁰⌋`, capped at [`MAX_K_HAT`].
pub fn k_from_alpha<T: Real>(alpha0: T) -> u32 {
    let inv = alpha0.recip().floor().to_f64_lossy();
    (2.0 + inv).min(MAX_K_HAT as f64) as u32
}

/// Selected order and whether the preliminary estimate failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KHat {
    pub k: u32,
    pub fallback: bool,
}

/// `k̂` from the preliminary two-point `α⁰` at `k = 1`, `t = (1, 2)`;
/// falls back to 2 when `α⁰` is unavailable or outside `(0, 2)`.
pub fn select_k_hat<T: Real>(path: &SamplePath<T>, p: T) -> Result<KHat> {
    let prelim = TwoPointConfig {
        t1: T::one(),
        t2: T::of(2.0),
        p,
        k: 1,
    };
    let phi = emp_charfn_grid(path, &[prelim.t1, prelim.t2], 1)?;
    match closed_form_alpha(phi[0], phi[1], prelim.t1, prelim.t2) {
        Ok(a) if a > T::zero() && a < T::of(2.0) => Ok(KHat {
            k: k_from_alpha(a),
            fallback: false,
        }),
        _ => {
            log::warn!("preliminary alpha unavailable, using k = 2");
            Ok(KHat {
                k: 2,
                fallback: true,
            })
        }
    }
}
