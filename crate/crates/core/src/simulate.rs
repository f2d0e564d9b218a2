//! Synthetic paths of the linear fractional stable motion on the integer
//! grid, by a Riemann discretization of the moving-average representation.
//!
//! The unit-time increments are
//! `Y_j = Σ_{l=1}^{mM} a(l) Z_{mj-l}` with
//! `a(l) = (l/m)^d - ((l-m)/m)_+^d` and i.i.d. `Z ~ SαS(σ m^{-1/α})`.
//! The convolution is split into `m` polyphase components
//! `a_s[q] = a(mq+s)`, `z_s[c] = Z_{mc-s}`, each a plain convolution in the
//! output index, and evaluated block-wise by overlap-save FFTs. Innovations
//! above a large multiple of their scale are applied by direct summation so
//! their magnitude never enters the floating-point FFT.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{LfsmError, Result};
use crate::model::LfsmParams;
use crate::stable::{RngStream, SasSampler, StableLaw};
use crate::stats::{PathMeta, SamplePath};

/// How the discretized moving average is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Convolution {
    /// FFT unless the padded problem is shorter than [`DIRECT_BELOW`].
    #[default]
    Auto,
    Direct,
    Fft,
}

/// Padded lengths below this use direct convolution under [`Convolution::Auto`].
pub const DIRECT_BELOW: usize = 4096;

/// Innovations larger than this many scale units bypass the FFT.
const JUMP_THRESHOLD: f64 = 1.0e4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: LfsmParams<f64>,
    pub n: usize,
    pub mesh: usize,
    pub truncation: usize,
    pub seed: RngStream,
    #[serde(default)]
    pub method: Convolution,
    /// Upper bound on the number of innovations `m(n + M)`.
    #[serde(default = "default_max_draws")]
    pub max_draws: usize,
}

fn default_max_draws() -> usize {
    1 << 31
}

impl SimConfig {
    pub fn new(params: LfsmParams<f64>, n: usize, seed: RngStream) -> Self {
        Self {
            params,
            n,
            mesh: 256,
            truncation: 600,
            seed,
            method: Convolution::Auto,
            max_draws: default_max_draws(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n == 0 || self.mesh == 0 || self.truncation == 0 {
            return Err(LfsmError::Config(format!(
                "n, m and M must be positive, got n={}, m={}, M={}",
                self.n, self.mesh, self.truncation
            )));
        }
        let draws = self
            .mesh
            .checked_mul(self.n + self.truncation)
            .ok_or_else(|| LfsmError::Resource("innovation count overflows".into()))?;
        if draws > self.max_draws {
            return Err(LfsmError::Resource(format!(
                "{draws} innovations exceed the cap of {}",
                self.max_draws
            )));
        }
        Ok(())
    }

    fn uses_fft(&self) -> bool {
        match self.method {
            Convolution::Direct => false,
            Convolution::Fft => true,
            Convolution::Auto => {
                (self.n + 2 * self.truncation + 1).next_power_of_two() >= DIRECT_BELOW
            }
        }
    }
}

/// Kernel weights `a(0..=mM)` with `a(0) = 0`.
fn kernel_weights(d: f64, m: usize, horizon: usize) -> Vec<f64> {
    let mf = m as f64;
    (0..=m * horizon)
        .map(|l| {
            if l == 0 {
                return 0.0;
            }
            let u = l as f64 / mf;
            if l <= m {
                u.powf(d)
            } else {
                // u^d (1 - (1 - 1/u)^d) without cancellation
                -u.powf(d) * (d * (-1.0 / u).ln_1p()).exp_m1()
            }
        })
        .collect()
}

/// Simulates `X_1, …, X_n` (with the implied `X_0 = 0` dropped).
pub fn simulate_lfsm(cfg: &SimConfig) -> Result<SamplePath<f64>> {
    cfg.validate()?;
    let increments = simulate_increments(cfg)?;
    let mut acc = 0.0;
    let values: Vec<f64> = increments
        .iter()
        .map(|y| {
            acc += y;
            acc
        })
        .collect();
    let meta = PathMeta {
        seed: Some(cfg.seed.seed),
        stream: Some(cfg.seed.stream),
        mesh: Some(cfg.mesh),
        truncation: Some(cfg.truncation),
        truth: Some(cfg.params),
    };
    Ok(SamplePath::new(values)?.with_meta(meta))
}

/// Unit-time increments `Y_1, …, Y_n`.
pub fn simulate_increments(cfg: &SimConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let p = cfg.params;
    let scale = p.sigma * (cfg.mesh as f64).powf(-1.0 / p.alpha);
    let sampler = SasSampler::new(StableLaw::new(p.alpha, scale)?);
    let mut rng = cfg.seed.rng();
    Ok(increments_from(cfg, scale, move || sampler.draw(&mut rng)))
}

/// Riemann-sum increments driven by `draw`, which must yield S-α-S
/// innovations of the given scale in index order.
fn increments_from(cfg: &SimConfig, scale: f64, draw: impl FnMut() -> f64) -> Vec<f64> {
    let p = cfg.params;
    let (m, horizon, n) = (cfg.mesh, cfg.truncation, cfg.n);
    let weights = kernel_weights(p.exponent(), m, horizon);
    // Z_i for i = -mM + 1, …, mn in increasing order
    let first = 1 - (m * horizon) as i64;
    let mut source = Innovations {
        draw,
        next: first,
        threshold: JUMP_THRESHOLD * scale,
        jumps: Vec::new(),
    };
    let mut y = if cfg.uses_fft() {
        let spectra = kernel_spectra(&weights, p, m, horizon);
        overlap_save(&spectra, &mut source, m, horizon, n)
    } else {
        direct(&weights, &mut source, m, horizon, n)
    };
    let span = (m * horizon) as i64;
    for &(i, z) in &source.jumps {
        // contributes a(mj - i) z to every j with 1 ≤ mj - i ≤ mM
        let lo = ((i + 1) as f64 / m as f64).ceil().max(1.0) as i64;
        let hi = ((i + span).div_euclid(m as i64)).min(n as i64);
        for j in lo..=hi {
            y[(j - 1) as usize] += weights[(m as i64 * j - i) as usize] * z;
        }
    }
    y
}

struct Innovations<F: FnMut() -> f64> {
    draw: F,
    next: i64,
    threshold: f64,
    jumps: Vec<(i64, f64)>,
}

impl<F: FnMut() -> f64> Innovations<F> {
    /// Next innovation in index order; large ones are set aside and
    /// returned as zero.
    fn take(&mut self) -> f64 {
        let z = (self.draw)();
        let i = self.next;
        self.next += 1;
        if z.abs() > self.threshold {
            self.jumps.push((i, z));
            0.0
        } else {
            z
        }
    }
}

fn direct<F: FnMut() -> f64>(
    weights: &[f64],
    source: &mut Innovations<F>,
    m: usize,
    horizon: usize,
    n: usize,
) -> Vec<f64> {
    let total = m * (n + horizon);
    let z: Vec<f64> = (0..total).map(|_| source.take()).collect();
    let offset = (m * horizon) as i64 - 1; // z[i + offset] = Z_i
    (1..=n as i64)
        .map(|j| {
            let mut acc = 0.0;
            for (l, a) in weights.iter().enumerate().skip(1) {
                acc += a * z[(m as i64 * j - l as i64 + offset) as usize];
            }
            acc
        })
        .collect()
}

/// Block length for overlap-save: the smallest power of two holding four
/// kernel lengths, at least 1024.
fn block_len(horizon: usize) -> usize {
    (4 * (horizon + 1)).next_power_of_two().max(1024)
}

/// Pairwise-packed polyphase kernel spectra: for phases `(s, s')` the
/// arrays `(A_s - iA_{s'})/2` and `(A_s + iA_{s'})/2`, so that one complex
/// FFT of `z_s + i z_{s'}` serves both phases.
struct KernelSpectra {
    len: usize,
    pairs: Vec<(Vec<Complex64>, Vec<Complex64>)>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

type SpectraKey = (u64, u64, usize, usize);

fn spectra_cache() -> &'static Mutex<HashMap<SpectraKey, Arc<KernelSpectra>>> {
    static CACHE: OnceLock<Mutex<HashMap<SpectraKey, Arc<KernelSpectra>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn kernel_spectra(
    weights: &[f64],
    p: LfsmParams<f64>,
    m: usize,
    horizon: usize,
) -> Arc<KernelSpectra> {
    let key = (p.alpha.to_bits(), p.hurst.to_bits(), m, horizon);
    if let Some(s) = spectra_cache()
        .lock()
        .expect("spectra cache poisoned")
        .get(&key)
    {
        return Arc::clone(s);
    }
    let len = block_len(horizon);
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);
    let phase = |s: usize| -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for (q, slot) in buf.iter_mut().enumerate().take(horizon + 1) {
            let l = m * q + s;
            if l < weights.len() {
                slot.re = weights[l];
            }
        }
        forward.process(&mut buf);
        buf
    };
    let i = Complex64::new(0.0, 1.0);
    let mut pairs = Vec::with_capacity(m.div_ceil(2));
    let mut s = 0;
    while s < m {
        let a = phase(s);
        let b = if s + 1 < m {
            phase(s + 1)
        } else {
            vec![Complex64::new(0.0, 0.0); len]
        };
        let b1 = a.iter().zip(&b).map(|(x, y)| (x - i * y) * 0.5).collect();
        let b2 = a.iter().zip(&b).map(|(x, y)| (x + i * y) * 0.5).collect();
        pairs.push((b1, b2));
        s += 2;
    }
    let spectra = Arc::new(KernelSpectra {
        len,
        pairs,
        forward,
        inverse,
    });
    let mut cache = spectra_cache().lock().expect("spectra cache poisoned");
    if cache.len() >= 4 {
        cache.clear();
    }
    cache.insert(key, Arc::clone(&spectra));
    spectra
}

fn overlap_save<F: FnMut() -> f64>(
    spectra: &KernelSpectra,
    source: &mut Innovations<F>,
    m: usize,
    horizon: usize,
    n: usize,
) -> Vec<f64> {
    let len = spectra.len;
    let step = len - horizon;
    // buffer row t holds Z_{m(c-1)+1..=mc} for c = c_start + t
    let mut zbuf = vec![0.0f64; len * m];
    let mut filled = 0usize; // rows already holding data for the current block
    let mut c_start = 1 - horizon as i64;
    let c_last = n as i64;
    let mut out = Vec::with_capacity(n);
    let mut work = vec![Complex64::new(0.0, 0.0); len];
    let mut acc = vec![Complex64::new(0.0, 0.0); len];
    let mut scratch = vec![Complex64::new(0.0, 0.0); spectra.forward.get_inplace_scratch_len()];
    while out.len() < n {
        for t in filled..len {
            let c = c_start + t as i64;
            let row = &mut zbuf[t * m..(t + 1) * m];
            if c <= c_last {
                for z in row.iter_mut() {
                    *z = source.take();
                }
            } else {
                row.fill(0.0);
            }
        }
        acc.fill(Complex64::new(0.0, 0.0));
        for (pair, (b1, b2)) in spectra.pairs.iter().enumerate() {
            let s = 2 * pair;
            // z_s[c] = Z_{mc-s} sits at column m-1-s of row c
            for (t, w) in work.iter_mut().enumerate() {
                let row = &zbuf[t * m..(t + 1) * m];
                let re = row[m - 1 - s];
                let im = if s + 1 < m { row[m - 2 - s] } else { 0.0 };
                *w = Complex64::new(re, im);
            }
            spectra
                .forward
                .process_with_scratch(&mut work, &mut scratch);
            for k in 0..len {
                let rev = work[(len - k) % len].conj();
                acc[k] += b1[k] * work[k] + b2[k] * rev;
            }
        }
        spectra.inverse.process_with_scratch(&mut acc, &mut scratch);
        let norm = 1.0 / len as f64;
        let take = step.min(n - out.len());
        out.extend(acc[horizon..horizon + take].iter().map(|v| v.re * norm));
        // keep the last `horizon` rows as the head of the next block
        zbuf.copy_within(step * m..len * m, 0);
        filled = horizon;
        c_start += step as i64;
    }
    out
}

/// Empirical check of `H`-self-similarity through lag-`a` increments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarityReport {
    pub lag: usize,
    pub ratio: f64,
    pub target: f64,
    pub std_error: f64,
    pub within: bool,
}

/// Compares the mean of `|X_{i} - X_{i-a}|^p` with `a^{pH}` times the mean
/// of `|X_i - X_{i-1}|^p`; the standard error comes from 20 batch means.
pub fn self_similarity_check(
    path: &SamplePath<f64>,
    hurst: f64,
    lag: usize,
    p: f64,
) -> Result<SelfSimilarityReport> {
    const BATCHES: usize = 20;
    if lag == 0 {
        return Err(LfsmError::InvalidParameter("lag must be positive".into()));
    }
    let x = path.values();
    if x.len() < BATCHES * (lag + 1) * 2 {
        return Err(LfsmError::InsufficientData {
            needed: BATCHES * (lag + 1) * 2,
            got: x.len(),
        });
    }
    let target = (lag as f64).powf(p * hurst);
    if lag == 1 {
        return Ok(SelfSimilarityReport {
            lag,
            ratio: 1.0,
            target,
            std_error: 0.0,
            within: true,
        });
    }
    let batch = x.len() / BATCHES;
    let mut ratios = Vec::with_capacity(BATCHES);
    for b in 0..BATCHES {
        let seg = &x[b * batch..(b + 1) * batch];
        let mean_pow = |r: usize| -> f64 {
            let terms = seg.len() - r;
            seg.windows(r + 1)
                .map(|w| (w[r] - w[0]).abs().powf(p))
                .sum::<f64>()
                / terms as f64
        };
        ratios.push(mean_pow(lag) / mean_pow(1));
    }
    let mean = ratios.iter().sum::<f64>() / BATCHES as f64;
    let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    let std_error = (var / BATCHES as f64).sqrt();
    Ok(SelfSimilarityReport {
        lag,
        ratio: mean,
        target,
        std_error,
        within: (mean - target).abs() <= 3.0 * std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{emp_charfn, increments, power_variation};

    fn cfg(sigma: f64, alpha: f64, hurst: f64, n: usize, seed: u64) -> SimConfig {
        SimConfig::new(
            LfsmParams::new(sigma, alpha, hurst).unwrap(),
            n,
            RngStream::new(seed, 0),
        )
    }

    #[test]
    fn weights_match_definition() {
        let w = kernel_weights(-0.3, 4, 3);
        for (l, a) in w.iter().enumerate().skip(1) {
            let u = l as f64 / 4.0;
            let direct = u.powf(-0.3) - if u > 1.0 { (u - 1.0).powf(-0.3) } else { 0.0 };
            assert!((a - direct).abs() <= 1e-13 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn fft_agrees_with_direct_convolution() {
        for &(alpha, hurst) in &[(1.8, 0.8), (0.6, 0.3), (1.0, 0.5)] {
            let mut c = cfg(0.3, alpha, hurst, 1500, 17);
            c.mesh = 8;
            c.truncation = 40;
            c.method = Convolution::Direct;
            let d = simulate_increments(&c).unwrap();
            c.method = Convolution::Fft;
            let f = simulate_increments(&c).unwrap();
            let scale = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (a, b) in d.iter().zip(&f) {
                assert!(
                    (a - b).abs() <= 1e-9 * scale.max(1.0),
                    "({alpha},{hurst}): {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn odd_mesh_uses_padding_phase() {
        let mut c = cfg(0.3, 1.5, 0.7, 300, 2);
        c.mesh = 5;
        c.truncation = 20;
        c.method = Convolution::Direct;
        let d = simulate_increments(&c).unwrap();
        c.method = Convolution::Fft;
        let f = simulate_increments(&c).unwrap();
        for (a, b) in d.iter().zip(&f) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let mut c = cfg(0.3, 1.2, 0.6, 2000, 5);
        c.mesh = 32;
        let a = simulate_lfsm(&c).unwrap();
        let b = simulate_lfsm(&c).unwrap();
        assert_eq!(a.values(), b.values());
        c.seed = RngStream::new(6, 0);
        assert_ne!(a.values(), simulate_lfsm(&c).unwrap().values());
        assert_eq!(a.meta.truth, Some(c.params));
    }

    #[test]
    fn levy_motion_when_kernel_is_indicator() {
        // H = 1/α makes a(l) the indicator of l ≤ m, so unit increments are SαS(σ)
        let (sigma, alpha) = (0.7, 1.25);
        let mut c = cfg(sigma, alpha, 1.0 / alpha, 20_000, 8);
        c.mesh = 16;
        c.truncation = 5;
        let path = simulate_lfsm(&c).unwrap();
        let inc = increments(&path, 1, 1).unwrap();
        for &u in &[0.5f64, 1.0, 2.0] {
            let vals: Vec<f64> = inc.values.iter().map(|y| (u * y).cos()).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (vals.len() - 1) as f64)
                .sqrt();
            let target = (-(sigma * u).abs().powf(alpha)).exp();
            assert!(
                (mean - target).abs() <= 3.0 * sd / (vals.len() as f64).sqrt(),
                "u={u}: {mean} vs {target}"
            );
        }
    }

    #[test]
    fn increments_are_stationary() {
        let mut c = cfg(0.3, 1.6, 0.7, 20_000, 9);
        c.mesh = 32;
        let path = simulate_lfsm(&c).unwrap();
        let half = path.len() / 2;
        let p = -0.4;
        let stat = |part: &SamplePath| {
            let inc = increments(part, 2, 1).unwrap();
            let terms: Vec<f64> = inc.values.iter().map(|v| v.abs().powf(p)).collect();
            let mean = terms.iter().sum::<f64>() / terms.len() as f64;
            let var =
                terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (terms.len() - 1) as f64;
            (mean, var / terms.len() as f64)
        };
        let (m1, v1) = stat(&path.block(0, half).unwrap());
        let (m2, v2) = stat(&path.block(half, half).unwrap());
        // dependence inflates the naive variance only mildly for these increments
        assert!(
            (m1 - m2).abs() <= 3.0 * (2.0 * (v1 + v2)).sqrt(),
            "{m1} vs {m2}"
        );
        let _ = power_variation(&path, p, 2, 1).unwrap();
        let _ = emp_charfn(&path, 1.0, 2).unwrap();
    }

    #[test]
    fn self_similarity_ratio() {
        let mut c = cfg(0.3, 1.8, 0.8, 40_000, 10);
        c.mesh = 64;
        let path = simulate_lfsm(&c).unwrap();
        let one = self_similarity_check(&path, 0.8, 1, -0.4).unwrap();
        assert_eq!(one.ratio, 1.0);
        let two = self_similarity_check(&path, 0.8, 2, -0.4).unwrap();
        assert!((two.target - 2f64.powf(-0.32)).abs() < 1e-15);
        assert!(two.within, "{two:?}");
        let four = self_similarity_check(&path, 0.8, 4, -0.4).unwrap();
        assert!(four.within, "{four:?}");
    }

    #[test]
    fn resource_cap_and_validation() {
        let mut c = cfg(0.3, 1.8, 0.8, 1000, 1);
        c.max_draws = 1000;
        assert!(matches!(simulate_lfsm(&c), Err(LfsmError::Resource(_))));
        c.max_draws = default_max_draws();
        c.mesh = 0;
        assert!(matches!(simulate_lfsm(&c), Err(LfsmError::Config(_))));
    }

    #[test]
    fn mesh_refinement_is_below_noise() {
        let p = LfsmParams::new(0.3, 1.5, 0.7).unwrap();
        let fine = 512usize;
        let scale = p.sigma * (fine as f64).powf(-1.0 / p.alpha);
        let sampler = SasSampler::new(StableLaw::new(p.alpha, scale).unwrap());
        let psi = |y: Vec<f64>| {
            let x: Vec<f64> = y
                .iter()
                .scan(0.0, |acc, v| {
                    *acc += v;
                    Some(*acc)
                })
                .collect();
            power_variation(&SamplePath::new(x).unwrap(), -0.4, 2, 1).unwrap()
        };
        let (mut coarse, mut diff) = (Vec::new(), Vec::new());
        for rep in 0..20 {
            let seed = RngStream::new(34, rep);
            let base = SimConfig {
                mesh: fine,
                ..SimConfig::new(p, 2_000, seed)
            };
            let mut rng = seed.rng();
            let a = psi(increments_from(&base, scale, || sampler.draw(&mut rng)));
            // adjacent fine innovations sum to one coarse innovation
            let mut rng = seed.rng();
            let half = SimConfig {
                mesh: fine / 2,
                ..base.clone()
            };
            let b = psi(increments_from(
                &half,
                scale * 2f64.powf(1.0 / p.alpha),
                || sampler.draw(&mut rng) + sampler.draw(&mut rng),
            ));
            coarse.push(b);
            diff.push(a - b);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let m = mean(&coarse);
        let se = (coarse.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 19.0).sqrt() / 20f64.sqrt();
        let shift = mean(&diff);
        assert!(
            shift.abs() < se,
            "mesh doubling moves ψ(1) by {shift}, s.e. {se}"
        );
    }
}
