//! Symmetric α-stable variates and the constants of the power-variation
//! limit theory.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{LfsmError, Result};
use crate::quadrature::adaptive_gk;
use crate::scalar::Real;

/// Symmetric α-stable law with characteristic function `exp(-|σu|^α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableLaw<T = f64> {
    pub alpha: T,
    pub sigma: T,
}

impl<T: Real> StableLaw<T> {
    pub fn new(alpha: T, sigma: T) -> Result<Self> {
        let law = Self { alpha, sigma };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero() && self.alpha < T::of(2.0)) {
            return Err(LfsmError::InvalidParameter(format!(
                "stability index must lie in (0, 2), got {}",
                self.alpha
            )));
        }
        if !(self.sigma > T::zero() && self.sigma.is_finite()) {
            return Err(LfsmError::InvalidParameter(format!(
                "scale must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// Characteristic function at `u`.
    pub fn charfn(&self, u: T) -> T {
        (-(self.sigma * u).abs().powf(self.alpha)).exp()
    }
}

/// Identifies one reproducible random stream.
///
/// Streams with equal `(seed, stream)` produce identical sequences; streams
/// differing in `stream` are disjoint ChaCha keystreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// A child stream, deterministic in `(self, index)`.
    pub fn derive(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(self.stream);
        StreamRng { inner }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator state for one [`RngStream`]. Owned by a single task.
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn uniform_open(&mut self) -> f64 {
        self.inner.sample(Open01)
    }

    pub fn exp1(&mut self) -> f64 {
        self.inner.sample(Exp1)
    }

    pub fn gen<R>(&mut self) -> R
    where
        rand::distr::StandardUniform: rand::distr::Distribution<R>,
    {
        self.inner.random()
    }
}

impl rand::RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Chambers–Mallows–Stuck transform for the symmetric case.
///
/// `angle` must lie in `(-π/2, π/2)` and `exp_draw` is a unit exponential.
pub fn sas_from_uniforms(alpha: f64, sigma: f64, angle: f64, exp_draw: f64) -> f64 {
    if alpha == 1.0 {
        return sigma * angle.tan();
    }
    let a = alpha * angle;
    let lead = a.sin() / angle.cos().powf(1.0 / alpha);
    let tail = ((angle - a).cos() / exp_draw).powf((1.0 - alpha) / alpha);
    sigma * lead * tail
}

/// Draws one SαS variate.
pub fn sample_sas<T: Real>(law: &StableLaw<T>, rng: &mut StreamRng) -> T {
    let angle = PI * (rng.uniform_open() - 0.5);
    let w = rng.exp1();
    T::of(sas_from_uniforms(
        law.alpha.to_f64_lossy(),
        law.sigma.to_f64_lossy(),
        angle,
        w,
    ))
}

/// Bulk SαS sampler with the α-dependent exponents hoisted out of the loop.
#[derive(Debug, Clone, Copy)]
pub struct SasSampler {
    alpha: f64,
    sigma: f64,
    inv_alpha: f64,
    tail_exp: f64,
}

impl SasSampler {
    pub fn new(law: StableLaw<f64>) -> Self {
        Self {
            alpha: law.alpha,
            sigma: law.sigma,
            inv_alpha: 1.0 / law.alpha,
            tail_exp: (1.0 - law.alpha) / law.alpha,
        }
    }

    #[inline]
    pub fn draw(&self, rng: &mut StreamRng) -> f64 {
        let angle = PI * (rng.uniform_open() - 0.5);
        let w = rng.exp1();
        if self.alpha == 1.0 {
            return self.sigma * angle.tan();
        }
        let a = self.alpha * angle;
        // sin(aV) cos(V)^{-1/α} (cos(V - aV)/W)^{(1-α)/α} in log form for the
        // two powers
        let log_mag =
            -self.inv_alpha * angle.cos().ln() + self.tail_exp * ((angle - a).cos().ln() - w.ln());
        self.sigma * a.sin() * log_mag.exp()
    }

    pub fn fill(&self, rng: &mut StreamRng, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.draw(rng);
        }
    }
}

const TAIL_CUTOFF: f64 = 1.0e3;

fn ap_cache() -> &'static Mutex<HashMap<u64, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The normalizing constant `a_p` of the power-variation representation.
///
/// For `p ∈ (0,1)` this is `∫_ℝ (1 - cos y)|y|^{-1-p} dy`, computed by
/// adaptive quadrature split at `|y| = 1` with an asymptotic tail beyond
/// `|y| = 1000`. For `p ∈ (-1,0)` it is
/// `√(2π) Γ(-p/2) / (2^{p+1/2} Γ((p+1)/2))`.
pub fn a_p_constant(p: f64) -> Result<f64> {
    if !(p > -1.0 && p < 1.0) || p == 0.0 {
        return Err(LfsmError::Domain(format!(
            "a_p is defined for p in (-1, 1) without 0, got {p}"
        )));
    }
    if p < 0.0 {
        use statrs::function::gamma::gamma;
        return Ok(
            (2.0 * PI).sqrt() * gamma(-p / 2.0) / (2f64.powf(p + 0.5) * gamma((p + 1.0) / 2.0))
        );
    }
    if let Some(v) = ap_cache().lock().expect("cache poisoned").get(&p.to_bits()) {
        return Ok(*v);
    }
    let integrand = |y: f64| {
        let s = (0.5 * y).sin();
        2.0 * s * s * y.powf(-1.0 - p)
    };
    let head = adaptive_gk(0.0, 1.0, 1e-12, 1e-13, 2_000, integrand);
    let body = adaptive_gk(1.0, TAIL_CUTOFF, 1e-11, 1e-13, 20_000, integrand);
    let tail = TAIL_CUTOFF.powf(-p) / p - cos_power_tail(TAIL_CUTOFF, 1.0 + p);
    let value = 2.0 * (head.value + body.value + tail);
    ap_cache()
        .lock()
        .expect("cache poisoned")
        .insert(p.to_bits(), value);
    Ok(value)
}

/// `∫_T^∞ cos(y) y^{-s} dy` by its asymptotic expansion
/// `Re[i e^{iT} Σ_m (-i)^m (s)_m T^{-s-m}]`, accurate for large `T`.
pub(crate) fn cos_power_tail(t: f64, s: f64) -> f64 {
    let (sin_t, cos_t) = t.sin_cos();
    // i e^{iT} = -sin T + i cos T
    let base = (-sin_t, cos_t);
    let mut term_re = 1.0;
    let mut term_im = 0.0;
    let mut coef = t.powf(-s);
    let mut acc_re = 0.0;
    let mut acc_im = 0.0;
    for m in 0..12 {
        acc_re += coef * term_re;
        acc_im += coef * term_im;
        // multiply by (-i)
        let (re, im) = (term_im, -term_re);
        term_re = re;
        term_im = im;
        coef *= (s + m as f64) / t;
    }
    base.0 * acc_re - base.1 * acc_im
}

/// Angle that maps `u ∈ (0,1)` to `(-π/2, π/2)`.
pub fn angle_of_uniform(u: f64) -> f64 {
    PI * (u - 0.5)
}
