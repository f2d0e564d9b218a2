//! Minimal contrast estimation of `(σ, α)` with `H` plugged in from the
//! ratio estimator.

use serde::{Deserialize, Serialize};

use crate::error::{LfsmError, Result};
use crate::model::{kernel_alpha_norm_search, ALPHA_SEARCH_MAX};
use crate::quadrature::gauss_hermite;
use crate::scalar::Real;
use crate::stats::{emp_charfn_grid, estimate_hurst, SamplePath};

/// Gaussian weight `w_ν(t) = exp(-t²/(2ν²))`.
pub fn weight_w<T: Real>(nu: T, t: T) -> T {
    (-(t * t) / (T::of(2.0) * nu * nu)).exp()
}

/// Positive nodes and weights for `∫_0^∞ f(t) w_ν(t) dt ≈ Σ ω_i f(t_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule<T = f64> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

/// Keeps the `order` positive nodes of the order-`2·order` Gauss–Hermite
/// rule and maps them to the weight `w_ν`.
pub fn quad_rule<T: Real>(nu: T, order: usize) -> Result<QuadRule<T>> {
    if order == 0 {
        return Err(LfsmError::InvalidParameter(
            "quadrature order must be at least 1".into(),
        ));
    }
    if !(nu > T::zero() && nu.is_finite()) {
        return Err(LfsmError::InvalidParameter(format!(
            "weight bandwidth must be positive, got {nu}"
        )));
    }
    let gh = gauss_hermite(2 * order);
    let scale = std::f64::consts::SQRT_2 * nu.to_f64_lossy();
    let mut nodes = Vec::with_capacity(order);
    let mut weights = Vec::with_capacity(order);
    for (s, w) in gh.nodes.iter().zip(&gh.weights) {
        if *s > 0.0 {
            nodes.push(T::of(scale * s));
            weights.push(T::of(scale * w));
        }
    }
    Ok(QuadRule { nodes, weights })
}

/// Simplex coefficients and stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Relative tolerance on the spread of function values.
    pub ftol: f64,
    /// Absolute tolerance on the simplex diameter.
    pub xtol: f64,
    pub max_iter: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            ftol: 1e-10,
            xtol: 1e-8,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<T> {
    pub argmin: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub spread: T,
    pub diameter: T,
}

/// Unconstrained Nelder–Mead. Points where `f` is `+∞` are never accepted
/// over finite ones, so a start inside a finite region stays there.
pub fn nelder_mead<T: Real, F: FnMut(&[T]) -> T>(
    mut f: F,
    x0: &[T],
    opts: &NelderMeadOptions,
) -> Minimum<T> {
    let dim = x0.len();
    let scale = x0.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let step = if scale > T::zero() {
        T::of(0.1) * scale
    } else {
        T::of(0.1)
    };
    let mut evaluations = 0usize;
    let mut eval = |x: &[T]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            T::infinity()
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(dim + 1);
    let v0 = eval(x0);
    simplex.push((x0.to_vec(), v0));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] = x[i] + step;
        let v = eval(&x);
        simplex.push((x, v));
    }
    let (alpha, gamma) = (T::of(opts.reflection), T::of(opts.expansion));
    let (rho, shrink) = (T::of(opts.contraction), T::of(opts.shrink));
    let ftol = T::of(opts.ftol);
    let xtol = T::of(opts.xtol);

    let mut iterations = 0;
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("no NaN after sanitizing"));
        let lo = simplex[0].1;
        let hi = simplex[dim].1;
        let spread = hi - lo;
        let diameter = simplex_diameter(&simplex);
        if (spread.is_finite() && spread <= ftol * (lo.abs() + ftol)) || diameter <= xtol {
            converged = true;
        }
        if converged || iterations >= opts.max_iter {
            return Minimum {
                argmin: simplex[0].0.clone(),
                value: lo,
                iterations,
                evaluations,
                converged,
                spread,
                diameter,
            };
        }
        iterations += 1;

        let mut centroid = vec![T::zero(); dim];
        for (x, _) in &simplex[..dim] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c = *c + *v;
            }
        }
        for c in &mut centroid {
            *c = *c / T::of(dim as f64);
        }
        let worst = simplex[dim].0.clone();
        let along = |t: T| -> Vec<T> {
            centroid
                .iter()
                .zip(&worst)
                .map(|(c, w)| *c + t * (*c - *w))
                .collect()
        };

        let xr = along(alpha);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(alpha * gamma);
            let fe = eval(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < hi {
            let xc = along(alpha * rho);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < fr.min(hi) {
            simplex[dim] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<T> = best
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| *b + shrink * (*v - *b))
                .collect();
            let v = eval(&x);
            *vertex = (x, v);
        }
    }
}

fn simplex_diameter<T: Real>(simplex: &[(Vec<T>, T)]) -> T {
    let mut d = T::zero();
    for (i, a) in simplex.iter().enumerate() {
        for b in &simplex[i + 1..] {
            let dist =
                a.0.iter()
                    .zip(&b.0)
                    .fold(T::zero(), |acc, (x, y)| acc + (*x - *y) * (*x - *y))
                    .sqrt();
            d = d.max(dist);
        }
    }
    d
}

/// Tuning of the minimal contrast estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig<T = f64> {
    pub p: T,
    pub k: u32,
    pub nu: T,
    pub quad_order: usize,
    pub start: (T, T),
    pub optimizer: NelderMeadOptions,
    pub sigma_box: T,
}

impl<T: Real> Default for EstimatorConfig<T> {
    fn default() -> Self {
        Self {
            p: T::of(-0.4),
            k: 2,
            nu: T::of(0.1),
            quad_order: 12,
            start: (T::of(2.0), T::one()),
            optimizer: NelderMeadOptions::default(),
            sigma_box: T::of(100.0),
        }
    }
}

impl<T: Real> EstimatorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > T::zero() && self.nu.is_finite()) {
            return Err(LfsmError::Config(format!(
                "nu must be positive, got {}",
                self.nu
            )));
        }
        if self.quad_order < 4 {
            return Err(LfsmError::Config(format!(
                "quad_order must be at least 4, got {}",
                self.quad_order
            )));
        }
        if self.k == 0 {
            return Err(LfsmError::Config("k must be positive".into()));
        }
        if !(self.p > -T::one() && self.p < T::one()) || self.p == T::zero() {
            return Err(LfsmError::Config(format!(
                "p must lie in (-1, 0) or (0, 1), got {}",
                self.p
            )));
        }
        let (s, a) = self.start;
        if !(s > T::zero() && s <= self.sigma_box && a > T::zero() && a < T::of(2.0)) {
            return Err(LfsmError::Config(format!(
                "start ({s}, {a}) lies outside (0, {}] x (0, 2)",
                self.sigma_box
            )));
        }
        if self.optimizer.max_iter == 0 {
            return Err(LfsmError::Config("max_iter must be positive".into()));
        }
        Ok(())
    }

    pub fn rule(&self) -> Result<QuadRule<T>> {
        quad_rule(self.nu, self.quad_order)
    }
}

/// Optimizer trace kept for auditing; not serialized.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub evaluations: usize,
    pub final_spread: f64,
    pub final_diameter: f64,
    pub hurst_out_of_range: bool,
}

/// Fitted `ξ = (σ, α, H)` with optimizer status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct EstimateResult<T = f64> {
    #[serde(with = "crate::scalar::nan_as_null")]
    pub sigma: T,
    #[serde(with = "crate::scalar::nan_as_null")]
    pub alpha: T,
    #[serde(with = "crate::scalar::nan_as_null")]
    pub hurst: T,
    #[serde(with = "crate::scalar::nan_as_null")]
    pub objective: T,
    pub iterations: usize,
    pub converged: bool,
    pub failed: bool,
    #[serde(skip)]
    pub diagnostics: Diagnostics,
}

impl<T: Real> EstimateResult<T> {
    pub fn xi(&self) -> [T; 3] {
        [self.sigma, self.alpha, self.hurst]
    }
}

/// `φ_{θ,H}(t) = exp(-|σ ‖h_k‖_α t|^α)`, or `None` when the norm does not
/// exist for these arguments.
fn model_curve<T: Real>(sigma: T, alpha: T, hurst: T, k: u32, nodes: &[T]) -> Option<Vec<T>> {
    let norm = T::of(kernel_alpha_norm_search(k, alpha.to_f64_lossy(), hurst.to_f64_lossy()).ok()?);
    Some(
        nodes
            .iter()
            .map(|t| (-(sigma * norm * *t).abs().powf(alpha)).exp())
            .collect(),
    )
}

/// `F(φ, H, θ) = Σ_i ω_i (φ(t_i) - φ_{θ,H}(t_i))²`, `+∞` outside the search
/// box `(0, σ_max] × (0, ALPHA_SEARCH_MAX)`.
pub fn objective_f<T: Real>(
    phi_data: &[T],
    hurst: T,
    theta: (T, T),
    rule: &QuadRule<T>,
    k: u32,
    sigma_box: T,
) -> T {
    let (sigma, alpha) = theta;
    if !(sigma > T::zero()
        && sigma <= sigma_box
        && alpha > T::zero()
        && alpha < T::of(ALPHA_SEARCH_MAX))
    {
        return T::infinity();
    }
    let Some(model) = model_curve(sigma, alpha, hurst, k, &rule.nodes) else {
        return T::infinity();
    };
    phi_data
        .iter()
        .zip(&model)
        .zip(&rule.weights)
        .fold(T::zero(), |acc, ((d, m), w)| {
            acc + *w * (*d - *m) * (*d - *m)
        })
}

/// Chain-rule gradient of [`objective_f`] in `(σ, α)`. The derivative of
/// `‖h_k‖_α` in `α` is taken by central differences.
pub fn objective_gradient(
    phi_data: &[f64],
    hurst: f64,
    theta: (f64, f64),
    rule: &QuadRule<f64>,
    k: u32,
) -> Result<(f64, f64)> {
    let (sigma, alpha) = theta;
    let norm = kernel_alpha_norm_search(k, alpha, hurst)?;
    let h = 1e-5;
    let dnorm = (kernel_alpha_norm_search(k, alpha + h, hurst)?
        - kernel_alpha_norm_search(k, alpha - h, hurst)?)
        / (2.0 * h);
    let (mut gs, mut ga) = (0.0, 0.0);
    for ((t, w), d) in rule.nodes.iter().zip(&rule.weights).zip(phi_data) {
        let z = sigma * norm * t;
        let za = z.powf(alpha);
        let phi = (-za).exp();
        let resid = d - phi;
        let dphi_ds = -phi * alpha * za / sigma;
        let dphi_da = -phi * za * (z.ln() + alpha * dnorm / norm);
        gs += -2.0 * w * resid * dphi_ds;
        ga += -2.0 * w * resid * dphi_da;
    }
    Ok((gs, ga))
}

/// Minimizes `θ ↦ F(φ, H, θ)` for given characteristic-function values on
/// the quadrature nodes.
pub fn fit_theta<T: Real>(
    phi_data: &[T],
    hurst: T,
    rule: &QuadRule<T>,
    cfg: &EstimatorConfig<T>,
) -> EstimateResult<T> {
    let (k, sigma_box) = (cfg.k, cfg.sigma_box);
    let hurst_out_of_range = !(hurst > T::zero() && hurst < T::one());
    let usable = hurst > T::zero() && hurst < T::of(k as f64) && hurst.is_finite();
    if !usable {
        return EstimateResult {
            sigma: cfg.start.0,
            alpha: cfg.start.1,
            hurst,
            objective: T::infinity(),
            iterations: 0,
            converged: false,
            failed: true,
            diagnostics: Diagnostics {
                hurst_out_of_range,
                ..Diagnostics::default()
            },
        };
    }
    let min = nelder_mead(
        |x| objective_f(phi_data, hurst, (x[0], x[1]), rule, k, sigma_box),
        &[cfg.start.0, cfg.start.1],
        &cfg.optimizer,
    );
    let (sigma, alpha) = (min.argmin[0], min.argmin[1]);
    let alpha_ok = alpha > T::zero() && alpha < T::of(2.0);
    EstimateResult {
        sigma,
        alpha,
        hurst,
        objective: min.value,
        iterations: min.iterations,
        converged: min.converged,
        failed: !min.converged || !alpha_ok || !min.value.is_finite(),
        diagnostics: Diagnostics {
            evaluations: min.evaluations,
            final_spread: min.spread.to_f64_lossy(),
            final_diameter: min.diameter.to_f64_lossy(),
            hurst_out_of_range,
        },
    }
}

/// Two-stage estimator: `H_n(p, k)` from power variations, then `(σ, α)`
/// by minimal contrast.
pub fn estimate_mce<T: Real>(
    path: &SamplePath<T>,
    cfg: &EstimatorConfig<T>,
) -> Result<EstimateResult<T>> {
    cfg.validate()?;
    let hurst = estimate_hurst(path, cfg.p, cfg.k)?;
    estimate_mce_with_hurst(path, hurst.value, cfg)
}

/// Minimal contrast fit of `(σ, α)` with `H` supplied by the caller.
pub fn estimate_mce_with_hurst<T: Real>(
    path: &SamplePath<T>,
    hurst: T,
    cfg: &EstimatorConfig<T>,
) -> Result<EstimateResult<T>> {
    cfg.validate()?;
    let rule = cfg.rule()?;
    let phi = emp_charfn_grid(path, &rule.nodes, cfg.k)?;
    Ok(fit_theta(&phi, hurst, &rule, cfg))
}
