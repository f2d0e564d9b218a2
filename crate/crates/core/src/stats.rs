//! Data-side statistics: increments, power variations, the empirical
//! characteristic function and the ratio estimator of `H`.

use serde::{Deserialize, Serialize};

use crate::error::{LfsmError, Result};
use crate::model::LfsmParams;
use crate::scalar::Real;

/// Where a path came from, when known.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathMeta {
    pub seed: Option<u64>,
    pub stream: Option<u64>,
    pub mesh: Option<usize>,
    pub truncation: Option<usize>,
    pub truth: Option<LfsmParams<f64>>,
}

/// Observations `X_1, …, X_n` on the unit grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath<T = f64> {
    values: Vec<T>,
    pub meta: PathMeta,
}

impl<T: Real> SamplePath<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(LfsmError::InsufficientData { needed: 1, got: 0 });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LfsmError::InvalidParameter(format!(
                "path value at index {i} is not finite"
            )));
        }
        Ok(Self {
            values,
            meta: PathMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: PathMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Consecutive block `[start, start + len)` as a path of its own.
    pub fn block(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() || len == 0 {
            return Err(LfsmError::InvalidParameter(format!(
                "block [{start}, {}) outside a path of length {}",
                start + len,
                self.len()
            )));
        }
        Ok(Self {
            values: self.values[start..start + len].to_vec(),
            meta: self.meta.clone(),
        })
    }
}

/// `Δ_{i,k}^r X` for every `i` whose stencil lies inside the data, together
/// with the sample size `n` of the path.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSeries<T = f64> {
    pub values: Vec<T>,
    pub k: u32,
    pub r: u32,
    pub n: usize,
}

/// `Δ_{i,k}^r X = Σ_j (-1)^j C(k,j) X_{i-rj}` for `i = rk+1, …, n` (1-based).
pub fn increments<T: Real>(path: &SamplePath<T>, k: u32, r: u32) -> Result<IncrementSeries<T>> {
    if k == 0 || r == 0 {
        return Err(LfsmError::InvalidParameter(format!(
            "increment order and rate must be positive, got k={k}, r={r}"
        )));
    }
    let n = path.len();
    let span = (k * r) as usize;
    if n <= span {
        return Err(LfsmError::InsufficientData {
            needed: span + 1,
            got: n,
        });
    }
    let coef = binomial_row::<T>(k);
    let x = path.values();
    let values = (span..n)
        .map(|i| {
            coef.iter()
                .enumerate()
                .fold(T::zero(), |acc, (j, c)| acc + *c * x[i - r as usize * j])
        })
        .collect();
    Ok(IncrementSeries { values, k, r, n })
}

fn binomial_row<T: Real>(k: u32) -> Vec<T> {
    let mut row = vec![T::one()];
    for j in 1..=k {
        let prev = row[j as usize - 1];
        let c = prev * T::of((k - j + 1) as f64) / T::of(j as f64);
        row.push(c);
    }
    row.iter()
        .enumerate()
        .map(|(j, c)| if j % 2 == 0 { *c } else { -*c })
        .collect()
}

impl<T: Real> IncrementSeries<T> {
    /// Mean of `|Δ|^p` over the available increments.
    pub fn power_variation(&self, p: T) -> Result<T> {
        if !(p > -T::one() && p < T::one()) {
            return Err(LfsmError::Domain(format!(
                "power must lie in (-1, 1), got {p}"
            )));
        }
        let mut acc = T::zero();
        for (i, v) in self.values.iter().enumerate() {
            if *v == T::zero() {
                if p <= T::zero() {
                    return Err(LfsmError::DegenerateIncrement(format!(
                        "increment {i} is exactly zero with p = {p}"
                    )));
                }
                continue;
            }
            acc = acc + v.abs().powf(p);
        }
        Ok(acc / T::of(self.values.len() as f64))
    }

    /// Mean of `cos(t Δ)` over the available increments.
    pub fn charfn(&self, t: T) -> T {
        let s = self
            .values
            .iter()
            .fold(T::zero(), |acc, v| acc + (t * *v).cos());
        s / T::of(self.values.len() as f64)
    }
}

/// `ψ_n(r) = V_n(|·|^p, k, r)`.
pub fn power_variation<T: Real>(path: &SamplePath<T>, p: T, k: u32, r: u32) -> Result<T> {
    increments(path, k, r)?.power_variation(p)
}

/// `φ_n(t) = V_n(cos(t·), k, 1)`.
pub fn emp_charfn<T: Real>(path: &SamplePath<T>, t: T, k: u32) -> Result<T> {
    Ok(increments(path, k, 1)?.charfn(t))
}

/// `φ_n` on a grid of arguments, sharing one increment pass.
pub fn emp_charfn_grid<T: Real>(path: &SamplePath<T>, ts: &[T], k: u32) -> Result<Vec<T>> {
    let inc = increments(path, k, 1)?;
    Ok(ts.iter().map(|&t| inc.charfn(t)).collect())
}

/// Raw ratio estimate of `H` and whether it left `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurstEstimate<T = f64> {
    pub value: T,
    pub out_of_range: bool,
}

/// `H = (1/p) log₂ R` with `R = ψ_n(2)/ψ_n(1)`.
pub fn hurst_from_ratio<T: Real>(ratio: T, p: T) -> Result<HurstEstimate<T>> {
    if !(p > -T::one() && p < T::one()) || p == T::zero() {
        return Err(LfsmError::Domain(format!(
            "power must lie in (-1, 0) or (0, 1), got {p}"
        )));
    }
    if !(ratio > T::zero() && ratio.is_finite()) {
        return Err(LfsmError::DegenerateIncrement(format!(
            "power-variation ratio {ratio} has no logarithm"
        )));
    }
    let value = ratio.log2() / p;
    Ok(HurstEstimate {
        value,
        out_of_range: !(value > T::zero() && value < T::one()),
    })
}

/// Ratio estimator `H_n(p, k)`.
pub fn estimate_hurst<T: Real>(path: &SamplePath<T>, p: T, k: u32) -> Result<HurstEstimate<T>> {
    if !(p > -T::one() && p < T::one()) || p == T::zero() {
        return Err(LfsmError::Domain(format!(
            "power must lie in (-1, 0) or (0, 1), got {p}"
        )));
    }
    let psi1 = power_variation(path, p, k, 1)?;
    let psi2 = power_variation(path, p, k, 2)?;
    if psi1 == T::zero() || psi2 == T::zero() {
        return Err(LfsmError::DegenerateIncrement(
            "power variation vanished".into(),
        ));
    }
    hurst_from_ratio(psi2 / psi1, p)
}
