//! Numerical versions of the quantities that appear in the limit theory
//! of the estimator: the dependence measure `U_{g,h}`, the overlap
//! integrals `ρ_l`, the functions `Φ_{t,η}`, `Φ¹_r`, `Φ̄_t` and the limit
//! coefficients `κ₁`, `κ₂`. They are used as targets for property tests.

use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::error::{LfsmError, Result};
use crate::model::{
    alpha_norm_r, beta_coeff, gl20, log_panels, Kernel, KernelSpec, LfsmParams, FAR_LIMIT,
};
use crate::quadrature::{adaptive_gk, gauss_legendre_panels, tanh_sinh, TanhSinh};
use crate::stable::{a_p_constant, cos_power_tail};

/// Default grid extent for [`GridFunction`].
pub const GRID_X_MAX: f64 = 200.0;
/// Default grid mesh for [`GridFunction`].
pub const GRID_DELTA: f64 = 1e-3;
const GRID_FAR: f64 = 1e8;

/// Power-law tail `f(x) ≈ coef · x^{-exponent}` beyond the sampled range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTail {
    pub coef: f64,
    pub exponent: f64,
}

/// A function on `[0, ∞)` represented by its values on a discrete measure:
/// midpoints of `[0, X_max]` with mesh `δ`, Gauss–Legendre nodes in
/// `ln x` on `[X_max, 10⁸]`, and an optional analytic power tail beyond.
///
/// All functionals are integrals against the same measure, so inequalities
/// between them hold exactly up to rounding.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub x_max: f64,
    pub delta: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<f64>,
    pub tail: Option<PowerTail>,
}

impl GridFunction {
    pub fn sample<F: Fn(f64) -> f64>(
        f: F,
        x_max: f64,
        delta: f64,
        tail: Option<PowerTail>,
    ) -> Result<Self> {
        if !(delta > 0.0 && x_max > delta && x_max.is_finite()) {
            return Err(LfsmError::InvalidParameter(format!(
                "grid needs 0 < delta < x_max, got delta={delta}, x_max={x_max}"
            )));
        }
        let cells = (x_max / delta).round() as usize;
        let step = x_max / cells as f64;
        let mut nodes: Vec<f64> = (0..cells).map(|i| (i as f64 + 0.5) * step).collect();
        let mut weights = vec![step; cells];
        let (la, lb) = (x_max.ln(), GRID_FAR.ln());
        let panels = ((lb - la) / 0.5).ceil() as usize;
        let width = (lb - la) / panels as f64;
        let rule = gl20();
        for p in 0..panels {
            let mid = la + (p as f64 + 0.5) * width;
            for (z, w) in rule.nodes.iter().zip(&rule.weights) {
                let x = (mid + 0.5 * width * z).exp();
                nodes.push(x);
                weights.push(0.5 * width * w * x);
            }
        }
        let values: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LfsmError::Domain(
                "grid function has non-finite samples".into(),
            ));
        }
        Ok(Self {
            x_max,
            delta: step,
            nodes,
            weights,
            values,
            tail,
        })
    }

    /// The kernel `x ↦ h_k(x + shift)` with its asymptotic tail.
    pub fn kernel(
        k: u32,
        alpha: f64,
        hurst: f64,
        shift: f64,
        x_max: f64,
        delta: f64,
    ) -> Result<Self> {
        KernelSpec::new(k, 1, alpha, hurst)?;
        let kernel = Kernel::new(k, hurst - 1.0 / alpha);
        let tail = PowerTail {
            coef: kernel.q(),
            exponent: k as f64 - kernel.d,
        };
        Self::sample(|x| kernel.eval(x + shift), x_max, delta, Some(tail))
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.nodes.len() != other.nodes.len() || self.delta != other.delta {
            return Err(LfsmError::InvalidParameter(
                "grid functions on different grids".into(),
            ));
        }
        Ok(())
    }

    /// `u·self + v·other` on the common grid.
    pub fn combine(&self, u: f64, other: &Self, v: f64) -> Result<Self> {
        self.same_grid(other)?;
        let tail = match (self.tail, other.tail) {
            (None, None) => None,
            (Some(a), None) => Some(PowerTail {
                coef: u * a.coef,
                ..a
            }),
            (None, Some(b)) => Some(PowerTail {
                coef: v * b.coef,
                ..b
            }),
            (Some(a), Some(b)) if a.exponent == b.exponent => Some(PowerTail {
                coef: u * a.coef + v * b.coef,
                exponent: a.exponent,
            }),
            _ => {
                return Err(LfsmError::InvalidParameter(
                    "cannot combine power tails with different exponents".into(),
                ))
            }
        };
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| u * a + v * b)
                .collect(),
            tail,
            ..self.clone()
        })
    }

    pub fn scaled(&self, u: f64) -> Self {
        Self {
            values: self.values.iter().map(|a| u * a).collect(),
            tail: self.tail.map(|t| PowerTail {
                coef: u * t.coef,
                ..t
            }),
            ..self.clone()
        }
    }

    /// `∫ |f|^α`.
    pub fn alpha_power(&self, alpha: f64) -> f64 {
        let body: f64 = self
            .weights
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.abs().powf(alpha))
            .sum();
        body + self.tail.map_or(0.0, |t| {
            power_tail_integral(t.coef.abs().powf(alpha), alpha * t.exponent)
        })
    }

    /// `∫ |f g|^{α/2}`.
    pub fn product_power(&self, other: &Self, alpha: f64) -> Result<f64> {
        self.same_grid(other)?;
        let half = 0.5 * alpha;
        let body: f64 = self
            .weights
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(w, (a, b))| w * (a * b).abs().powf(half))
            .sum();
        let tail = match (self.tail, other.tail) {
            (Some(a), Some(b)) => power_tail_integral(
                (a.coef * b.coef).abs().powf(half),
                half * (a.exponent + b.exponent),
            ),
            _ => 0.0,
        };
        Ok(body + tail)
    }
}

/// `∫_{10⁸}^∞ c x^{-s} dx`.
fn power_tail_integral(c: f64, s: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    assert!(s > 1.0, "tail is not integrable");
    c * GRID_FAR.powf(1.0 - s) / (s - 1.0)
}

/// `U_{g,h}(u,v) = exp(-σ^α ‖ug + vh‖_α^α) - exp(-σ^α (‖ug‖_α^α + ‖vh‖_α^α))`.
#[allow(non_snake_case)]
pub fn dep_measure_U(
    g: &GridFunction,
    h: &GridFunction,
    sigma: f64,
    alpha: f64,
    u: f64,
    v: f64,
) -> Result<f64> {
    let joint = g.combine(u, h, v)?.alpha_power(alpha);
    let split = g.scaled(u).alpha_power(alpha) + h.scaled(v).alpha_power(alpha);
    let s = sigma.powf(alpha);
    Ok((-s * joint).exp() - (-s * split).exp())
}

/// The right-hand side `2|uv|^{α/2} ∫|gh|^{α/2}` of the dependence bound.
pub fn dep_measure_bound(
    g: &GridFunction,
    h: &GridFunction,
    alpha: f64,
    u: f64,
    v: f64,
) -> Result<f64> {
    Ok(2.0 * (u * v).abs().powf(0.5 * alpha) * g.product_power(h, alpha)?)
}

/// `ρ_l = ∫_0^∞ |h_k(x) h_k(x + l)|^{α/2} dx`, with `ρ_{-l} = ρ_l`.
pub fn rho_l(k: u32, params: &LfsmParams<f64>, l: i64) -> Result<f64> {
    params.validate()?;
    KernelSpec::from_params(params, k, 1)?;
    let kernel = Kernel::new(k, params.exponent());
    let half = 0.5 * params.alpha;
    let l = l.abs();
    let mut total = 0.0;
    for m in 0..=k as i64 {
        let mut breaks = kernel.cell_breaks(m);
        breaks.extend(kernel.cell_breaks(m + l));
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        for w in breaks.windows(2) {
            let lo = w[0];
            total += tanh_sinh(lo, w[1], TanhSinh::default(), |u, _| {
                let x = lo + u;
                kernel.abs_pow(m, x, half) * kernel.abs_pow(m + l, x, half)
            });
        }
    }
    let start = (k + 1) as f64;
    total += log_panels(start, FAR_LIMIT, |x| {
        (kernel.eval(x) * kernel.eval(x + l as f64))
            .abs()
            .powf(half)
    });
    // |h(x) h(x+l)|^{α/2} ≈ |q|^α x^{-s} (1 + (α/2)(2c₁ - γl)/x)
    let gamma_k = k as f64 - kernel.d;
    let s = params.alpha * gamma_k;
    let corr = half * (2.0 * kernel.c1() - gamma_k * l as f64);
    total += kernel.q().abs().powf(params.alpha)
        * (FAR_LIMIT.powf(1.0 - s) / (s - 1.0) + corr * FAR_LIMIT.powf(-s) / s);
    Ok(total)
}

/// The bound `l^{(α(H-k)-1)/2}` on `ρ_l` in the regime `k > H + 1/α`.
pub fn rho_bound(k: u32, params: &LfsmParams<f64>, l: i64) -> f64 {
    (l.abs() as f64).powf(0.5 * (params.alpha * (params.hurst - k as f64) - 1.0))
}

/// `g_η(t) = exp(-|ηt|^α)`.
pub fn g_eta(t: f64, eta: f64, alpha: f64) -> f64 {
    (-(eta * t).abs().powf(alpha)).exp()
}

/// `Φ_{t,η}(x) = (cos(xt) - 1) g_η(t)` and its first two derivatives in `x`.
pub fn phi_t_eta(t: f64, eta: f64, alpha: f64, x: f64, derivative: u32) -> Result<f64> {
    if !(eta > 0.0 && t >= 0.0) {
        return Err(LfsmError::Domain(format!(
            "need eta > 0 and t >= 0, got eta={eta}, t={t}"
        )));
    }
    let g = g_eta(t, eta, alpha);
    let (s, c) = (x * t).sin_cos();
    match derivative {
        0 => Ok(-2.0 * (0.5 * x * t).sin().powi(2) * g),
        1 => Ok(-t * s * g),
        2 => Ok(-t * t * c * g),
        v => Err(LfsmError::Domain(format!(
            "derivative order {v} not supported"
        ))),
    }
}

fn expm1_c(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        z * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0)))
    } else {
        z.exp() - 1.0
    }
}

/// `a_p^{-1} ∫_ℝ (1 - cos(ux)) exp(-|c u|^α) |u|^{-1-p} du` for scale `c`.
///
/// The half-line integral is moved to the ray `u = s e^{iθ}` with
/// `αθ ≤ π/3`, where the oscillating factor decays exponentially, and then
/// integrated in `ln s`.
pub fn phi1_scaled(x: f64, c: f64, alpha: f64, p: f64) -> Result<f64> {
    let ap = a_p_constant(p)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    let x = x.abs();
    let theta = (PI / 2.0).min(PI / (3.0 * alpha));
    let ray = Complex64::from_polar(1.0, theta);
    let rot_alpha = Complex64::from_polar(c.powf(alpha), alpha * theta);
    let s_lo = (1.0 / x).min(1.0 / c) * (-40.0 / (1.0 - p)).exp();
    let s_hi = 80f64.powf(1.0 / alpha) / c;
    let (lo, hi) = (s_lo.ln(), s_hi.ln().max(s_lo.ln() + 1.0));
    let panels = ((hi - lo) / 0.5).ceil() as usize;
    let width = (hi - lo) / panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    let rule = gl20();
    for k in 0..panels {
        let mid = lo + (k as f64 + 0.5) * width;
        for (z, w) in rule.nodes.iter().zip(&rule.weights) {
            let tau = mid + 0.5 * width * z;
            let s = tau.exp();
            let osc = -expm1_c(Complex64::i() * ray * (s * x));
            let damp = (-rot_alpha * s.powf(alpha)).exp();
            acc += osc * damp * (s.powf(-p) * w * 0.5 * width);
        }
    }
    let value = (Complex64::from_polar(1.0, -p * theta) * acc).re;
    Ok(2.0 * value / ap)
}

/// `Φ¹_r(x)` with `c = σ ‖h_{k,r}‖_α`.
pub fn phi1_r(r: u32, x: f64, params: &LfsmParams<f64>, k: u32, p: f64) -> Result<f64> {
    params.validate()?;
    KernelSpec::from_params(params, k, r)?;
    let c = params.sigma * alpha_norm_r(k, r, params);
    phi1_scaled(x, c, params.alpha, p)
}

/// Default panel width in `ln z` for [`kappa1`].
pub const KAPPA_MESH: f64 = 0.5;

/// `κ₁(r) = (α/β) ∫_0^∞ Φ¹_r(q z) z^{-1-α/β} dz`, integrated in `ln z` on
/// panels of width `mesh` between `|qz| c ∈ [10⁻⁴, 10⁸]` with analytic
/// ends from the small- and large-argument behaviour of `Φ¹_r`.
pub fn kappa1(r: u32, params: &LfsmParams<f64>, k: u32, p: f64, mesh: f64) -> Result<f64> {
    params.validate()?;
    KernelSpec::from_params(params, k, r)?;
    let ap = a_p_constant(p)?;
    let alpha = params.alpha;
    let beta = beta_coeff(params, k);
    let s = alpha / beta;
    if p >= s {
        return Err(LfsmError::Domain(format!(
            "kappa1 diverges for p={p} >= alpha/beta={s}"
        )));
    }
    if !(mesh > 0.0) {
        return Err(LfsmError::InvalidParameter(format!(
            "mesh must be positive, got {mesh}"
        )));
    }
    let q = Kernel::new(k, params.exponent()).q().abs();
    let c = params.sigma * alpha_norm_r(k, r, params);
    let (x_lo, x_hi) = (1e-4 / c, 1e8 / c);
    let (z_lo, z_hi) = (x_lo / q, x_hi / q);
    let (lo, hi) = (z_lo.ln(), z_hi.ln());
    let panels = ((hi - lo) / mesh).ceil() as usize;
    let mut err = None;
    let body = gauss_legendre_panels(gl20(), lo, hi, panels, |tau| {
        let z = tau.exp();
        match phi1_scaled(q * z, c, alpha, p) {
            Ok(v) => v * z.powf(-s),
            Err(e) => {
                err = Some(e);
                0.0
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    // Φ¹(x) ≈ x² c^{p-2} Γ((2-p)/α) / (α a_p) near zero.
    let c2 = c.powf(p - 2.0) * gamma((2.0 - p) / alpha) / (alpha * ap);
    let head = c2 * q * q * z_lo.powf(2.0 - s) / (2.0 - s);
    // Φ¹(x) ≈ |x|^p - E|Y|^p (p > 0) or E|Y|^p - |x|^p (p < 0).
    let (lim, sign) = if p < 0.0 {
        (2.0 * c.powf(p) * gamma(-p / alpha) / (alpha * ap), -1.0)
    } else {
        (-2.0 * c.powf(p) * gamma(1.0 - p / alpha) / (p * ap), 1.0)
    };
    let tail = lim * z_hi.powf(-s) / s + sign * q.powf(p) * z_hi.powf(p - s) / (s - p);
    Ok(s * (head + body + tail))
}

/// `Φ²_t(y) = (cos(ty) - 1) exp(-|σ‖h_k‖_α t|^α)`.
pub fn phi2_t(t: f64, y: f64, params: &LfsmParams<f64>, k: u32) -> f64 {
    let eta = params.sigma * alpha_norm_r(k, 1, params);
    -2.0 * (0.5 * t * y).sin().powi(2) * g_eta(t, eta, params.alpha)
}

/// `κ₂(t) = (α/β) ∫_0^∞ Φ²_t(q z) z^{-1-α/β} dz`, by substituting
/// `y = |tq| z` and splitting the `y` integral at 1 and 1000 with an
/// asymptotic tail.
pub fn kappa2(t: f64, params: &LfsmParams<f64>, k: u32) -> Result<f64> {
    params.validate()?;
    KernelSpec::from_params(params, k, 1)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let beta = beta_coeff(params, k);
    let s = params.alpha / beta;
    let q = Kernel::new(k, params.exponent()).q().abs();
    let g = phi2_t(t, PI / t, params, k) / -2.0;
    const T: f64 = 1000.0;
    let integrand = |y: f64| {
        let h = (0.5 * y).sin();
        2.0 * h * h * y.powf(-1.0 - s)
    };
    let head = adaptive_gk(0.0, 1.0, 1e-13, 1e-13, 2_000, integrand).value;
    let body = adaptive_gk(1.0, T, 1e-12, 1e-13, 20_000, integrand).value;
    let tail = T.powf(-s) / s - cos_power_tail(T, 1.0 + s);
    Ok(-s * g * (t * q).abs().powf(s) * (head + body + tail))
}

/// `Φ̄_t(x) = Σ_{i≥1} Φ²_t(h_k(i) x)`.
///
/// Terms are summed directly while `h_k(i)x` still oscillates from one
/// index to the next; the rest is replaced by its midpoint
/// Euler–Maclaurin integral, itself closed by the quadratic small-argument
/// tail once `|t h_k(u) x| < 10⁻⁴`.
pub fn phi_bar(t: f64, x: f64, params: &LfsmParams<f64>, k: u32) -> Result<f64> {
    params.validate()?;
    KernelSpec::from_params(params, k, 1)?;
    if x == 0.0 || t == 0.0 {
        return Ok(0.0);
    }
    let kernel = Kernel::new(k, params.exponent());
    let q = kernel.q();
    let gamma_k = k as f64 - kernel.d;
    let tx = (t * x).abs();
    let phase_rate = gamma_k * q.abs() * tx;
    let direct = (phase_rate / 0.05)
        .powf(1.0 / (gamma_k + 1.0))
        .ceil()
        .max(100.0) as u64;
    let term = |u: f64| phi2_t(t, kernel.eval(u) * x, params, k);
    let mut sum = 0.0;
    for i in 1..=direct {
        sum += term(i as f64);
    }
    let a = direct as f64 + 0.5;
    let u_small = (tx * q.abs() / 1e-4).powf(1.0 / gamma_k).max(2.0 * a);
    let integral = log_panels(a, u_small, term);
    let g = -phi2_t(t, PI / t, params, k) / 2.0;
    let quad = -g * 0.5 * (tx * q).powi(2);
    let rest = quad * u_small.powf(1.0 - 2.0 * gamma_k) / (2.0 * gamma_k - 1.0);
    let h = 1e-3 * a;
    let deriv = (term(a + h) - term(a - h)) / (2.0 * h);
    Ok(sum + integral + rest + deriv / 24.0)
}

/// `| |x|^{-α/β} Φ̄_t(x) - κ₂(t) |`.
pub fn kappa2_deviation(t: f64, x: f64, params: &LfsmParams<f64>, k: u32) -> Result<f64> {
    let s = params.alpha / beta_coeff(params, k);
    Ok((x.abs().powf(-s) * phi_bar(t, x, params, k)? - kappa2(t, params, k)?).abs())
}
