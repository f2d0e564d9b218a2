//! Model-side quantities of the linear fractional stable motion: the
//! increment kernel `h_{k,r}`, its α-norm, the limiting characteristic
//! function of the increments and the regime coefficients.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{LfsmError, Result};
use crate::quadrature::{gauss_legendre, gauss_legendre_panels, tanh_sinh, Rule, TanhSinh};
use crate::scalar::Real;

/// The parameter triple `(σ, α, H)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LfsmParams<T = f64> {
    pub sigma: T,
    pub alpha: T,
    pub hurst: T,
}

impl<T: Real> LfsmParams<T> {
    pub fn new(sigma: T, alpha: T, hurst: T) -> Result<Self> {
        let p = Self {
            sigma,
            alpha,
            hurst,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > T::zero() && self.sigma.is_finite()) {
            return Err(LfsmError::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.alpha > T::zero() && self.alpha < T::of(2.0)) {
            return Err(LfsmError::InvalidParameter(format!(
                "alpha must lie in (0, 2), got {}",
                self.alpha
            )));
        }
        if !(self.hurst > T::zero() && self.hurst < T::one()) {
            return Err(LfsmError::InvalidParameter(format!(
                "H must lie in (0, 1), got {}",
                self.hurst
            )));
        }
        Ok(())
    }

    /// Kernel exponent `H - 1/α`.
    pub fn exponent(&self) -> T {
        self.hurst - self.alpha.recip()
    }

    pub fn cast<U: Real>(&self) -> LfsmParams<U> {
        LfsmParams {
            sigma: U::of(self.sigma.to_f64_lossy()),
            alpha: U::of(self.alpha.to_f64_lossy()),
            hurst: U::of(self.hurst.to_f64_lossy()),
        }
    }
}

/// Increment order `k`, rate `r` and the shape parameters fixing the
/// exponent `d = H - 1/α`.
///
/// `H` may exceed 1 here (any `H ∈ (0, k)` keeps `h_{k,r}` in `L^α`), which
/// lets estimators evaluate the model at raw Hurst estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec<T = f64> {
    pub k: u32,
    pub r: u32,
    pub alpha: T,
    pub hurst: T,
}

impl<T: Real> KernelSpec<T> {
    pub fn new(k: u32, r: u32, alpha: T, hurst: T) -> Result<Self> {
        if k == 0 || r == 0 {
            return Err(LfsmError::InvalidParameter(format!(
                "increment order and rate must be positive, got k={k}, r={r}"
            )));
        }
        if !(alpha > T::zero() && alpha < T::of(2.0)) {
            return Err(LfsmError::InvalidParameter(format!(
                "alpha must lie in (0, 2), got {alpha}"
            )));
        }
        if !(hurst > T::zero() && hurst < T::of(k as f64)) {
            return Err(LfsmError::InvalidParameter(format!(
                "H must lie in (0, k) for a finite kernel norm, got {hurst}"
            )));
        }
        Ok(Self { k, r, alpha, hurst })
    }

    pub fn from_params(params: &LfsmParams<T>, k: u32, r: u32) -> Result<Self> {
        Self::new(k, r, params.alpha, params.hurst)
    }

    pub fn exponent(&self) -> T {
        self.hurst - self.alpha.recip()
    }
}

/// `h_{k,r}(x) = Σ_j (-1)^j C(k,j) (x - rj)_+^d` with `x_+^a = 0` for `x ≤ 0`.
pub fn kernel_h<T: Real>(spec: &KernelSpec<T>, x: T) -> T {
    let kernel = Kernel::new(spec.k, spec.exponent().to_f64_lossy());
    let r = spec.r as f64;
    let x = x.to_f64_lossy();
    // h_{k,r}(x) = r^d h_k(x / r)
    T::of(r.powf(kernel.d) * kernel.eval(x / r))
}

/// `β = 1 + α(k - H)`.
pub fn beta_coeff<T: Real>(params: &LfsmParams<T>, k: u32) -> T {
    T::one() + params.alpha * (T::of(k as f64) - params.hurst)
}

/// Asymptotic regime of the increment statistics at order `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Normal,
    Stable,
    Boundary,
}

pub fn regime_of<T: Real>(params: &LfsmParams<T>, k: u32) -> Regime {
    let threshold = params.hurst + params.alpha.recip();
    let k = T::of(k as f64);
    if k > threshold {
        Regime::Normal
    } else if k < threshold {
        Regime::Stable
    } else {
        Regime::Boundary
    }
}

/// `q_{H,α,k} = Π_{i<k} (H - 1/α - i)`.
pub fn q_factor<T: Real>(params: &LfsmParams<T>, k: u32) -> T {
    let d = params.exponent();
    (0..k).fold(T::one(), |acc, i| acc * (d - T::of(i as f64)))
}

/// `‖h_k‖_α = (∫_0^∞ |h_k(x)|^α dx)^{1/α}`.
pub fn alpha_norm<T: Real>(k: u32, params: &LfsmParams<T>) -> T {
    T::of(
        kernel_alpha_norm(k, params.alpha.to_f64_lossy(), params.hurst.to_f64_lossy())
            .expect("validated parameters give a finite norm"),
    )
}

/// `‖h_{k,r}‖_α`, which equals `r^H ‖h_k‖_α` by the scaling `h_{k,r}(x) = r^d h_k(x/r)`.
pub fn alpha_norm_r<T: Real>(k: u32, r: u32, params: &LfsmParams<T>) -> T {
    T::of(r as f64).powf(params.hurst) * alpha_norm(k, params)
}

/// Limiting characteristic function `exp(-|σ ‖h_k‖_α t|^α)` of the order-`k`
/// increments.
pub fn theo_charfn<T: Real>(params: &LfsmParams<T>, k: u32, t: T) -> T {
    let norm = alpha_norm(k, params);
    (-(params.sigma * norm * t).abs().powf(params.alpha)).exp()
}

/// Upper end of the α range searched by the contrast fit. Estimates in
/// `[2, ALPHA_SEARCH_MAX)` are legitimate minimizers reported as failures.
pub const ALPHA_SEARCH_MAX: f64 = 4.0;

/// `‖h_k‖_α` for raw `(α, H)` with `α ∈ (0,2)` and `H ∈ (0, k)`; memoized.
pub fn kernel_alpha_norm(k: u32, alpha: f64, hurst: f64) -> Result<f64> {
    KernelSpec::new(k, 1, alpha, hurst)?;
    cached_norm(k, alpha, hurst)
}

/// [`kernel_alpha_norm`] over the wider range `α ∈ (0, ALPHA_SEARCH_MAX)`,
/// where `h_k` is still in `L^α`.
pub fn kernel_alpha_norm_search(k: u32, alpha: f64, hurst: f64) -> Result<f64> {
    if alpha < 2.0 {
        return kernel_alpha_norm(k, alpha, hurst);
    }
    if k == 0 || !(alpha < ALPHA_SEARCH_MAX) || !(hurst > 0.0 && hurst < k as f64) {
        return Err(LfsmError::InvalidParameter(format!(
            "no search norm for k={k}, α={alpha}, H={hurst}"
        )));
    }
    cached_norm(k, alpha, hurst)
}

fn cached_norm(k: u32, alpha: f64, hurst: f64) -> Result<f64> {
    let key = (k, quantize(alpha), quantize(hurst));
    if let Some(v) = norm_cache().read().expect("norm cache poisoned").get(&key) {
        return Ok(*v);
    }
    let (a, h) = (dequantize(key.1), dequantize(key.2));
    if a <= 0.0 {
        return Err(LfsmError::Domain(format!(
            "alpha {alpha} is below the norm resolution"
        )));
    }
    let value = integrate_abs_pow(k, h - 1.0 / a, a).powf(1.0 / a);
    if !value.is_finite() {
        return Err(LfsmError::Domain(format!(
            "‖h_{k}‖_α is not finite at α = {alpha}, H = {hurst}"
        )));
    }
    let mut cache = norm_cache().write().expect("norm cache poisoned");
    if cache.len() > 500_000 {
        cache.clear();
    }
    cache.insert(key, value);
    Ok(value)
}

const QUANTUM: f64 = 1e-12;

fn quantize(x: f64) -> i64 {
    (x / QUANTUM).round() as i64
}

fn dequantize(q: i64) -> f64 {
    q as f64 * QUANTUM
}

type NormKey = (u32, i64, i64);

fn norm_cache() -> &'static RwLock<HashMap<NormKey, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<NormKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

pub(crate) fn gl20() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(20))
}

fn gl16() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// Upper limit of the numerically integrated part; beyond it the
/// two-term asymptotic tail is used.
pub(crate) const FAR_LIMIT: f64 = 1.0e6;

/// `∫_0^∞ |h_k(x)|^power dx` for the unit-rate kernel with exponent `d`.
pub(crate) fn integrate_abs_pow(k: u32, d: f64, power: f64) -> f64 {
    let kernel = Kernel::new(k, d);
    let mut total = 0.0;
    for cell in 0..=k as i64 {
        total += kernel.integrate_cell(cell, |b, u| kernel.abs_pow(b, u, power));
    }
    let start = (k + 1) as f64;
    total += log_panels(start, FAR_LIMIT, |x| kernel.eval(x).abs().powf(power));
    total += kernel.tail_abs_pow(FAR_LIMIT, power);
    total
}

/// `∫_a^b f(x) dx` for a smooth, power-law-like `f` by Gauss–Legendre in
/// `s = ln x` on panels of width 1/2.
pub(crate) fn log_panels<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let (la, lb) = (a.ln(), b.ln());
    let panels = ((lb - la) / 0.5).ceil().max(1.0) as usize;
    gauss_legendre_panels(gl20(), la, lb, panels, |s| {
        let x = s.exp();
        x * f(x)
    })
}

/// The unit-rate kernel `h_k` with exponent `d`, evaluated stably near its
/// knots and far out in its tail.
#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    pub k: u32,
    pub d: f64,
    coef: Vec<f64>,
    series: Vec<f64>,
    series_from: f64,
    spline: Option<SplineTable>,
}

/// Cardinal B-spline weights on Gauss nodes, for the cancellation-free
/// representation `h_k(x) = q ∫_0^k B_k(t) (x - t)^{d-k} dt` (`x > k`).
#[derive(Debug, Clone)]
struct SplineTable {
    t: Vec<f64>,
    w: Vec<f64>,
}

impl Kernel {
    pub fn new(k: u32, d: f64) -> Self {
        let coef: Vec<f64> = (0..=k)
            .map(|j| {
                let c = binomial(k, j);
                if j % 2 == 0 {
                    c
                } else {
                    -c
                }
            })
            .collect();
        let series = asymptotic_coefficients(k, d, 120);
        let series_from = 4.0 * k as f64 * (1.0 + d.abs());
        let spline = (k >= 4).then(|| SplineTable::new(k));
        Self {
            k,
            d,
            coef,
            series,
            series_from,
            spline,
        }
    }

    /// `q_{H,α,k}`, the leading tail coefficient.
    pub fn q(&self) -> f64 {
        self.series[0]
    }

    /// `c₁` in `h_k(x) = q x^{d-k} (1 + c₁/x + …)`.
    pub fn c1(&self) -> f64 {
        self.series[1] / self.series[0]
    }

    fn pow_pos(&self, y: f64) -> f64 {
        if y > 0.0 {
            y.powf(self.d)
        } else {
            0.0
        }
    }

    /// `h_k(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= self.series_from {
            return self.eval_series(x);
        }
        if let Some(table) = &self.spline {
            if x >= self.k as f64 + 1.0 {
                return self.eval_spline(table, x);
            }
        }
        let base = x.floor();
        self.eval_offset(base as i64, x - base)
    }

    /// `h_k(b + u)` for an integer `b` and offset `u ≥ 0`, using the exact
    /// offset for the term whose knot sits at `b`.
    pub fn eval_offset(&self, b: i64, u: f64) -> f64 {
        let mut acc = 0.0;
        for (j, c) in self.coef.iter().enumerate() {
            let shift = b - j as i64;
            if shift < 0 {
                break;
            }
            acc += c * self.pow_pos(shift as f64 + u);
        }
        acc
    }

    /// `|h_k(b + u)|^power`, factoring out the singular term `u^d` near an
    /// active knot when `d < 0`.
    pub fn abs_pow(&self, b: i64, u: f64, power: f64) -> f64 {
        if self.d < 0.0 && b >= 0 && b <= self.k as i64 && u < 1.0 {
            let knot = self.coef[b as usize];
            let mut rest = 0.0;
            for j in 0..b as usize {
                rest += self.coef[j] * self.pow_pos((b - j as i64) as f64 + u);
            }
            let scaled = knot + rest * u.powf(-self.d);
            return u.powf(power * self.d) * scaled.abs().powf(power);
        }
        self.eval_offset(b, u).abs().powf(power)
    }

    fn eval_series(&self, x: f64) -> f64 {
        let inv = 1.0 / x;
        let mut acc = 0.0;
        let mut p = 1.0;
        for c in &self.series {
            let term = c * p;
            acc += term;
            if term.abs() <= 1e-18 * acc.abs() {
                break;
            }
            p *= inv;
        }
        acc * x.powf(self.d - self.k as f64)
    }

    fn eval_spline(&self, table: &SplineTable, x: f64) -> f64 {
        let e = self.d - self.k as f64;
        let s: f64 = table
            .t
            .iter()
            .zip(&table.w)
            .map(|(t, w)| w * (x - t).powf(e))
            .sum();
        self.q() * s
    }

    /// Splits the unit cell `[b, b+1]` at sign changes of `h_k`.
    pub fn cell_breaks(&self, b: i64) -> Vec<f64> {
        let mut breaks = vec![0.0];
        if b < self.k as i64 {
            breaks.extend(sign_changes(|u| self.eval_offset(b, u)));
        }
        breaks.push(1.0);
        breaks
    }

    /// Integrates `g(b, u)` over the cell `[b, b+1]` split at the kernel's
    /// zero crossings, where `g` receives the integer base and the offset.
    pub fn integrate_cell<G: Fn(i64, f64) -> f64>(&self, b: i64, g: G) -> f64 {
        let breaks = self.cell_breaks(b);
        let mut total = 0.0;
        for w in breaks.windows(2) {
            let lo = w[0];
            total += tanh_sinh(lo, w[1], TanhSinh::default(), |u, _| g(b, lo + u));
        }
        total
    }

    /// `∫_X^∞ |h_k|^power dx` from the two-term expansion
    /// `h_k(x) = q x^{d-k} (1 + c₁/x + …)`.
    pub fn tail_abs_pow(&self, x: f64, power: f64) -> f64 {
        let q = self.q();
        let c1 = self.c1();
        let gamma = power * (self.k as f64 - self.d); // decay exponent of |h|^power
        assert!(gamma > 1.0, "kernel power is not integrable at infinity");
        q.abs().powf(power)
            * (x.powf(1.0 - gamma) / (gamma - 1.0) + power * c1 * x.powf(-gamma) / gamma)
    }
}

impl SplineTable {
    fn new(k: u32) -> Self {
        let rule = gl16();
        let mut t = Vec::new();
        let mut w = Vec::new();
        let fact: f64 = (1..k).map(|i| i as f64).product();
        for piece in 0..k {
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                let tt = piece as f64 + 0.5 + 0.5 * x;
                // B_k(t) = 1/(k-1)! Σ_i (-1)^i C(k,i) (t - i)_+^{k-1}
                let mut b = 0.0;
                for i in 0..=k {
                    let y = tt - i as f64;
                    if y > 0.0 {
                        let c = binomial(k, i);
                        b += if i % 2 == 0 { c } else { -c } * y.powi(k as i32 - 1);
                    }
                }
                t.push(tt);
                w.push(0.5 * wt * b / fact);
            }
        }
        Self { t, w }
    }
}

/// Interior sign changes of `f` on `(0, 1)`, located by bisection.
pub(crate) fn sign_changes<F: Fn(f64) -> f64>(f: F) -> Vec<f64> {
    const SAMPLES: usize = 48;
    let mut out = Vec::new();
    let pts: Vec<f64> = (0..SAMPLES)
        .map(|i| (i as f64 + 0.5) / SAMPLES as f64)
        .collect();
    let vals: Vec<f64> = pts.iter().map(|&u| f(u)).collect();
    for i in 1..SAMPLES {
        let (fa, fb) = (vals[i - 1], vals[i]);
        if fa == 0.0 {
            out.push(pts[i - 1]);
            continue;
        }
        if fa.signum() != fb.signum() && fb != 0.0 {
            let (mut lo, mut hi) = (pts[i - 1], pts[i]);
            let mut flo = fa;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = f(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
    }
    out
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficients `b_m` (m = k, k+1, …) of `h_k(x) = x^{d} Σ_m b_m x^{-m}`,
/// returned as `[b_k, b_{k+1}, …]`.
///
/// `b_m = C(d, m) (-1)^m Σ_j (-1)^j C(k,j) j^m = C(d,m) (-1)^{m+k} k! S(m,k)`
/// with Stirling numbers of the second kind `S`.
fn asymptotic_coefficients(k: u32, d: f64, terms: usize) -> Vec<f64> {
    let k = k as usize;
    let max_m = k + terms;
    // stirling[m] holds S(m, k) built column by column over j ≤ k
    let mut col = vec![0.0f64; max_m + 1];
    col[0] = 1.0; // S(m, 0) = [m == 0]
    for j in 1..=k {
        let mut next = vec![0.0f64; max_m + 1];
        for m in 1..=max_m {
            next[m] = j as f64 * next[m - 1] + col[m - 1];
        }
        col = next;
    }
    let k_fact: f64 = (1..=k).map(|i| i as f64).product();
    let mut out = Vec::with_capacity(terms);
    // C(d, m) built incrementally
    let mut cdm = 1.0;
    for m in 0..max_m {
        if m >= k {
            let sign = if (m + k) % 2 == 0 { 1.0 } else { -1.0 };
            out.push(cdm * sign * k_fact * col[m]);
        }
        cdm *= (d - m as f64) / (m as f64 + 1.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(alpha: f64, hurst: f64) -> LfsmParams {
        LfsmParams::new(0.3, alpha, hurst).unwrap()
    }

    #[test]
    fn kernel_vanishes_left_of_origin() {
        let spec = KernelSpec::new(3, 2, 1.4, 0.6).unwrap();
        assert_eq!(kernel_h(&spec, -1.0), 0.0);
        assert_eq!(kernel_h(&spec, 0.0), 0.0);
    }

    #[test]
    fn kernel_hand_values() {
        let d = 0.8 - 1.0 / 1.8;
        let s1 = KernelSpec::new(1, 1, 1.8, 0.8).unwrap();
        assert_relative_eq!(kernel_h(&s1, 0.5), 0.5f64.powf(d), max_relative = 1e-14);
        assert_relative_eq!(kernel_h(&s1, 0.5), 0.8441, max_relative = 1e-4);
        let s2 = KernelSpec::new(2, 1, 1.8, 0.8).unwrap();
        assert_relative_eq!(kernel_h(&s2, 2.0), 2f64.powf(d) - 2.0, max_relative = 1e-14);
        assert_relative_eq!(kernel_h(&s2, 2.0), -0.8153, max_relative = 1e-4);
    }

    #[test]
    fn rate_scaling_identity() {
        let s = KernelSpec::new(2, 2, 1.3, 0.7).unwrap();
        let d = s.exponent();
        for &x in &[0.3, 1.7, 2.5, 4.2, 9.0] {
            let direct: f64 = (0..=2)
                .map(|j| {
                    let y: f64 = x - 2.0 * j as f64;
                    let c = [1.0, -2.0, 1.0][j];
                    if y > 0.0 {
                        c * y.powf(d)
                    } else {
                        0.0
                    }
                })
                .sum();
            assert_relative_eq!(kernel_h(&s, x), direct, max_relative = 1e-13);
        }
    }

    #[test]
    fn series_and_spline_agree_with_direct_sum() {
        for &(k, d) in &[(1u32, -0.3), (2, 0.24), (3, -0.45), (4, -1.1), (5, 0.2)] {
            let kern = Kernel::new(k, d);
            for &x in &[kern.series_from * 1.01, kern.series_from * 3.0] {
                // direct sum is still accurate to ~1e-7 this close in
                let base = x.floor();
                let direct = kern.eval_offset_direct(base as i64, x - base);
                assert_relative_eq!(kern.eval(x), direct, max_relative = 1e-6);
            }
            if kern.spline.is_some() {
                let x = k as f64 + 1.5;
                let base = x.floor();
                let direct = kern.eval_offset_direct(base as i64, x - base);
                assert_relative_eq!(
                    kern.eval_spline(kern.spline.as_ref().unwrap(), x),
                    direct,
                    max_relative = 1e-10
                );
            }
        }
    }

    impl Kernel {
        fn eval_offset_direct(&self, b: i64, u: f64) -> f64 {
            self.coef
                .iter()
                .enumerate()
                .map(|(j, c)| c * self.pow_pos((b - j as i64) as f64 + u))
                .sum()
        }
    }

    #[test]
    fn polynomial_annihilation() {
        // Σ_j (-1)^j C(k,j) (x - j)^{m} = 0 for m < k
        for k in 1..=5u32 {
            for m in 0..k {
                for &x in &[7.3, 11.0, 25.5] {
                    let s: f64 = (0..=k)
                        .map(|j| {
                            let c = binomial(k, j) * if j % 2 == 0 { 1.0 } else { -1.0 };
                            c * (x - j as f64).powi(m as i32)
                        })
                        .sum();
                    assert!(s.abs() < 1e-9 * x.powi(m as i32).max(1.0));
                }
            }
        }
    }

    #[test]
    fn indicator_kernel_has_unit_norm() {
        let p = params(1.25, 0.8); // H = 1/α
        assert_relative_eq!(alpha_norm(1, &p), 1.0, max_relative = 1e-9);
        assert_relative_eq!(
            theo_charfn(&p, 1, 1.0),
            (-(0.3f64).powf(1.25)).exp(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn beta_and_regime() {
        let p = params(1.8, 0.8);
        assert_relative_eq!(beta_coeff(&p, 2), 3.16, max_relative = 1e-14);
        assert_eq!(regime_of(&p, 2), Regime::Normal);
        let p = params(0.6, 0.8);
        assert_relative_eq!(beta_coeff(&p, 1), 1.12, max_relative = 1e-14);
        assert_eq!(regime_of(&p, 1), Regime::Stable);
        let p = LfsmParams::new(1.0, 1.0, 0.5).unwrap();
        assert_eq!(regime_of(&p, 1), Regime::Stable);
        let p = LfsmParams::new(1.0, 0.5, 0.0 + 0.5).unwrap();
        // H + 1/α = 2.5
        assert_eq!(regime_of(&p, 2), Regime::Stable);
        let p = LfsmParams::new(1.0f64, 1.0, 0.5).unwrap();
        let boundary = LfsmParams {
            hurst: 0.5,
            alpha: 2.0 / 3.0,
            ..p
        };
        // 0.5 + 1.5 = 2 exactly
        assert_eq!(regime_of(&boundary, 2), Regime::Boundary);
        assert!(LfsmParams::new(0.3, 2.0, 0.8).is_err());
    }

    #[test]
    fn q_factor_values() {
        let p = params(1.8, 0.8);
        assert_relative_eq!(q_factor(&p, 1), 0.8 - 1.0 / 1.8, max_relative = 1e-14);
        assert_relative_eq!(q_factor(&p, 2), -0.18469, max_relative = 1e-4);
        for k in 1..6 {
            let sign = if (k - 1) % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(q_factor(&p, k).signum(), sign);
        }
        assert_relative_eq!(
            Kernel::new(2, p.exponent()).q(),
            q_factor(&p, 2),
            max_relative = 1e-14
        );
    }

    #[test]
    fn kernel_tail_law() {
        for &(alpha, hurst, k) in &[
            (1.8, 0.8, 2u32),
            (0.6, 0.8, 1),
            (1.2, 0.3, 2),
            (0.9, 0.5, 2),
            (0.4, 0.4, 2),
        ] {
            let p = params(alpha, hurst);
            let spec = KernelSpec::new(k, 1, alpha, hurst).unwrap();
            let beta = beta_coeff(&p, k);
            let q = q_factor(&p, k);
            let mut prev = f64::INFINITY;
            for &x in &[1e2, 1e3, 1e4] {
                let dev = (kernel_h(&spec, x) / (q * x.powf(-beta / alpha)) - 1.0).abs();
                assert!(dev <= 0.05, "({alpha},{hurst},{k}) at {x}: {dev}");
                assert!(dev < prev);
                prev = dev;
            }
        }
    }

    #[test]
    fn charfn_is_decreasing_to_zero() {
        let p = params(1.8, 0.8);
        assert_eq!(theo_charfn(&p, 2, 0.0), 1.0);
        let mut prev = 1.0;
        for i in 1..=100 {
            let v = theo_charfn(&p, 2, i as f64 * 0.5);
            assert!(v < prev && v >= 0.0);
            prev = v;
        }
        assert!(prev < 1e-10);
    }

    /// Independent α-norm: graded midpoint rule on the unit cells, midpoint
    /// rule in `ln x` further out, and the kernel written as
    /// `x^d Σ_j c_j expm1(d ln1p(-j/x))` to avoid cancellation.
    fn riemann_norm_pow(k: u32, alpha: f64, hurst: f64) -> f64 {
        let d = hurst - 1.0 / alpha;
        let c: Vec<f64> = (0..=k)
            .map(|j| binomial(k, j) * if j % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let far = |x: f64| -> f64 {
            let s: f64 = c
                .iter()
                .enumerate()
                .map(|(j, cj)| cj * (d * (-(j as f64) / x).ln_1p()).exp_m1())
                .sum();
            s * x.powf(d)
        };
        // near the knots the offset from the cell's left end is kept exact
        let near = |cell: u32, t: f64| -> f64 {
            c.iter()
                .enumerate()
                .take(cell as usize + 1)
                .map(|(j, cj)| cj * ((cell - j as u32) as f64 + t).powf(d))
                .sum()
        };
        // x = j + w^g concentrates nodes at the knot singularity
        let g = 8.0;
        let n = 200_000;
        let mut total = 0.0;
        for j in 0..=k {
            for i in 0..n {
                let w = (i as f64 + 0.5) / n as f64;
                total += near(j, w.powf(g)).abs().powf(alpha) * g * w.powf(g - 1.0) / n as f64;
            }
        }
        let (a, b) = (((k + 1) as f64).ln(), 1e4f64.ln());
        let m = 400_000;
        for i in 0..m {
            let s = a + (b - a) * (i as f64 + 0.5) / m as f64;
            let x = s.exp();
            total += far(x).abs().powf(alpha) * x * (b - a) / m as f64;
        }
        let q = (0..k).fold(1.0, |acc, i| acc * (d - i as f64));
        let gamma = alpha * (k as f64 - d);
        total + q.abs().powf(alpha) * 1e4f64.powf(1.0 - gamma) / (gamma - 1.0)
    }

    #[test]
    fn alpha_norm_matches_riemann_oracle() {
        for &(alpha, hurst, k) in &[
            (1.8, 0.8, 2u32),
            (1.2, 0.6, 2),
            (1.0, 0.2, 2),
            (0.4, 0.4, 4),
            (1.5, 0.5, 1),
        ] {
            let fast = kernel_alpha_norm(k, alpha, hurst).unwrap().powf(alpha);
            let slow = riemann_norm_pow(k, alpha, hurst);
            assert_relative_eq!(fast, slow, max_relative = 1e-4);
        }
    }

    #[test]
    fn alpha_norm_rejects_divergent_orders() {
        assert!(kernel_alpha_norm(1, 1.5, 1.2).is_err());
        assert!(kernel_alpha_norm(2, 1.5, 1.2).is_ok());
        assert!(kernel_alpha_norm(2, 2.0, 0.5).is_err());
        assert!(kernel_alpha_norm_search(2, 2.0, 0.8).is_ok());
        assert!(kernel_alpha_norm_search(2, ALPHA_SEARCH_MAX, 0.5).is_err());
    }

    #[test]
    fn search_norm_matches_riemann_oracle_past_two() {
        for &(alpha, hurst) in &[(2.0, 0.8), (2.4, 0.8), (3.5, 0.3)] {
            let fast = kernel_alpha_norm_search(2, alpha, hurst)
                .unwrap()
                .powf(alpha);
            assert_relative_eq!(fast, riemann_norm_pow(2, alpha, hurst), max_relative = 1e-4);
        }
    }

    #[test]
    fn rate_norm_matches_direct_quadrature() {
        let p = params(1.4, 0.6);
        let spec = KernelSpec::new(2, 2, 1.4, 0.6).unwrap();
        // ∫_0^∞ |h_{2,2}|^α over knots 0, 2, 4 via substitution x = 2y
        let direct =
            2.0 * integrate_abs_pow(2, spec.exponent(), 1.4) * 2f64.powf(1.4 * spec.exponent());
        assert_relative_eq!(
            alpha_norm_r(2, 2, &p).powf(1.4),
            direct,
            max_relative = 1e-10
        );
    }

    #[test]
    fn generic_over_f32() {
        let p = LfsmParams::<f32>::new(0.3, 1.8, 0.8).unwrap();
        let v = theo_charfn(&p, 2, 1.0f32);
        let w = theo_charfn(&p.cast::<f64>(), 2, 1.0);
        assert!((v as f64 - w).abs() < 1e-6);
    }

    #[test]
    fn vanishing_alpha_is_a_domain_error() {
        assert!(matches!(
            kernel_alpha_norm(2, 1e-14, 0.4),
            Err(LfsmError::Domain(_))
        ));
        assert!(kernel_alpha_norm(2, 0.1, 0.4).is_ok());
    }
}
