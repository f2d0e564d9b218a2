//! Confidence regions from the parametric bootstrap and from subsampling
//! with adaptively chosen increment order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::classic::select_k_hat;
use crate::contrast::{estimate_mce, estimate_mce_with_hurst, EstimateResult, EstimatorConfig};
use crate::error::{LfsmError, Result};
use crate::model::LfsmParams;
use crate::simulate::{simulate_lfsm, SimConfig};
use crate::stable::RngStream;
use crate::stats::{estimate_hurst, SamplePath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Bootstrap,
    Subsampling,
}

/// Scale information behind the intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Spread {
    /// Bootstrap standard deviations of `(σ, α, H)`.
    StdErr([f64; 3]),
    /// Lower and upper quantiles of the scaled group deviations.
    Quantiles { lower: [f64; 3], upper: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRegion {
    pub sigma: (f64, f64),
    pub alpha: (f64, f64),
    pub hurst: (f64, f64),
    pub estimate: [f64; 3],
    pub method: Method,
    pub level: f64,
    /// Bootstrap resamples or number of groups.
    pub tuning: usize,
    pub spread: Spread,
    pub attempted: usize,
    pub dropped: usize,
    /// Increment order used for the full-sample fit.
    pub k: u32,
}

impl ConfidenceRegion {
    pub fn intervals(&self) -> [(f64, f64); 3] {
        [self.sigma, self.alpha, self.hurst]
    }

    /// Whether each coordinate of `xi` lies in its interval.
    pub fn covers(&self, xi: &LfsmParams<f64>) -> [bool; 3] {
        let v = [xi.sigma, xi.alpha, xi.hurst];
        let iv = self.intervals();
        [0, 1, 2].map(|j| iv[j].0 <= v[j] && v[j] <= iv[j].1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub level: f64,
    pub mesh: usize,
    pub truncation: usize,
    pub seed: RngStream,
}

impl BootstrapConfig {
    pub fn new(resamples: usize, seed: RngStream) -> Self {
        Self {
            resamples,
            level: 0.95,
            mesh: 256,
            truncation: 600,
            seed,
        }
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(LfsmError::Config(format!(
            "level must lie in (0, 1), got {level}"
        )))
    }
}

fn fail_check(dropped: usize, total: usize) -> Result<()> {
    if 2 * dropped > total {
        Err(LfsmError::UnreliableRegion {
            failed: dropped,
            total,
        })
    } else {
        Ok(())
    }
}

/// Parametric bootstrap: refit `N` paths simulated from the fitted
/// parameters and use `ξ_n ± z σ̂_j`.
pub fn bootstrap_ci(
    path: &SamplePath<f64>,
    cfg: &EstimatorConfig<f64>,
    boot: &BootstrapConfig,
) -> Result<ConfidenceRegion> {
    if boot.resamples < 2 {
        return Err(LfsmError::Config(format!(
            "bootstrap needs at least 2 resamples, got {}",
            boot.resamples
        )));
    }
    check_level(boot.level)?;
    let fit = estimate_mce(path, cfg)?;
    if fit.failed {
        return Err(LfsmError::EstimationFailed(
            "fit on the original path failed".into(),
        ));
    }
    let xi = LfsmParams::new(fit.sigma, fit.alpha, fit.hurst).map_err(|e| {
        LfsmError::EstimationFailed(format!("fitted parameters cannot be simulated: {e}"))
    })?;
    let n = path.len();
    let refits: Vec<Option<[f64; 3]>> = (0..boot.resamples)
        .into_par_iter()
        .map(|j| {
            let mut sim = SimConfig::new(xi, n, boot.seed.derive(j as u64));
            sim.mesh = boot.mesh;
            sim.truncation = boot.truncation;
            let est = simulate_lfsm(&sim)
                .and_then(|x| estimate_mce(&x, cfg))
                .ok()?;
            (!est.failed).then(|| est.xi())
        })
        .collect();
    bootstrap_region(fit.xi(), &refits, boot.level, cfg.k)
}

/// Interval assembly from the original estimate and the refits, with
/// failed refits given as `None`.
pub fn bootstrap_region(
    center: [f64; 3],
    refits: &[Option<[f64; 3]>],
    level: f64,
    k: u32,
) -> Result<ConfidenceRegion> {
    check_level(level)?;
    let total = refits.len();
    let good: Vec<[f64; 3]> = refits.iter().flatten().copied().collect();
    let dropped = total - good.len();
    fail_check(dropped, total)?;
    if good.len() < 2 {
        return Err(LfsmError::UnreliableRegion {
            failed: dropped,
            total,
        });
    }
    let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    let sd = [0, 1, 2].map(|c| {
        let vals: Vec<f64> = good.iter().map(|v| v[c]).collect();
        sample_variance(&vals).sqrt()
    });
    let iv = [0, 1, 2].map(|c| (center[c] - z * sd[c], center[c] + z * sd[c]));
    Ok(ConfidenceRegion {
        sigma: iv[0],
        alpha: iv[1],
        hurst: iv[2],
        estimate: center,
        method: Method::Bootstrap,
        level,
        tuning: total,
        spread: Spread::StdErr(sd),
        attempted: total,
        dropped,
        k,
    })
}

fn sample_variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Type-7 empirical quantile (linear interpolation between order
/// statistics). `sorted` must be ascending and non-empty.
pub fn quantile_type7(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `[ξ - q_hi/√n, ξ - q_lo/√n]` from scaled deviations `√b (est_l - ξ)`.
pub fn quantile_interval(
    center: f64,
    deviations: &[f64],
    n: usize,
    level: f64,
) -> (f64, f64, f64, f64) {
    let mut sorted = deviations.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let tail = (1.0 - level) / 2.0;
    let q_lo = quantile_type7(&sorted, tail);
    let q_hi = quantile_type7(&sorted, 1.0 - tail);
    let root = (n as f64).sqrt();
    (center - q_hi / root, center - q_lo / root, q_lo, q_hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleConfig {
    pub groups: usize,
    pub level: f64,
}

impl SubsampleConfig {
    pub fn new(groups: usize) -> Self {
        Self {
            groups,
            level: 0.95,
        }
    }
}

/// One group's estimates, or `None` when the group fit failed.
fn group_estimate(
    group: &SamplePath<f64>,
    plug_in: f64,
    cfg: &EstimatorConfig<f64>,
) -> Option<[f64; 3]> {
    let k = select_k_hat(group, cfg.p).ok()?.k;
    let local = EstimatorConfig { k, ..cfg.clone() };
    let fit = estimate_mce_with_hurst(group, plug_in, &local).ok()?;
    if fit.failed {
        return None;
    }
    let h = estimate_hurst(group, cfg.p, k).ok()?;
    h.value
        .is_finite()
        .then_some([fit.sigma, fit.alpha, h.value])
}

/// Subsampling region: `k̂` and `ξ_n` on the full path, per-group
/// estimates with the full-sample `H` as plug-in for `(σ, α)`, and
/// quantile inversion of `√(n/L)(est_l - ξ_n)`.
pub fn subsample_ci(
    path: &SamplePath<f64>,
    sub: &SubsampleConfig,
    cfg: &EstimatorConfig<f64>,
) -> Result<ConfidenceRegion> {
    check_level(sub.level)?;
    let n = path.len();
    let groups = sub.groups;
    if groups < 2 || n % groups != 0 {
        return Err(LfsmError::Config(format!(
            "the number of groups must divide n = {n} and be at least 2, got {groups}"
        )));
    }
    let size = n / groups;
    let k_hat = select_k_hat(path, cfg.p)?;
    let full_cfg = EstimatorConfig {
        k: k_hat.k,
        ..cfg.clone()
    };
    let fit: EstimateResult<f64> = estimate_mce(path, &full_cfg)?;
    if fit.failed {
        return Err(LfsmError::EstimationFailed("full-sample fit failed".into()));
    }
    let blocks: Vec<SamplePath<f64>> = (0..groups)
        .map(|l| path.block(l * size, size))
        .collect::<Result<_>>()?;
    let estimates: Vec<Option<[f64; 3]>> = blocks
        .par_iter()
        .map(|g| group_estimate(g, fit.hurst, cfg))
        .collect();
    let good: Vec<[f64; 3]> = estimates.iter().flatten().copied().collect();
    let dropped = groups - good.len();
    fail_check(dropped, groups)?;
    let center = fit.xi();
    let root_b = (size as f64).sqrt();
    let mut lower = [0.0; 3];
    let mut upper = [0.0; 3];
    let mut iv = [(0.0, 0.0); 3];
    for c in 0..3 {
        let dev: Vec<f64> = good.iter().map(|e| root_b * (e[c] - center[c])).collect();
        let (lo, hi, q_lo, q_hi) = quantile_interval(center[c], &dev, n, sub.level);
        iv[c] = (lo, hi);
        lower[c] = q_lo;
        upper[c] = q_hi;
    }
    Ok(ConfidenceRegion {
        sigma: iv[0],
        alpha: iv[1],
        hurst: iv[2],
        estimate: center,
        method: Method::Subsampling,
        level: sub.level,
        tuning: groups,
        spread: Spread::Quantiles { lower, upper },
        attempted: groups,
        dropped,
        k: k_hat.k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn type7_matches_hand_values() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_type7(&v, 0.0), 1.0);
        assert_eq!(quantile_type7(&v, 1.0), 5.0);
        assert_eq!(quantile_type7(&v, 0.5), 3.0);
        assert!((quantile_type7(&v, 0.1) - 1.4).abs() < 1e-15);
        assert_eq!(quantile_type7(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn zero_spread_gives_point_interval() {
        let (lo, hi, q_lo, q_hi) = quantile_interval(0.8, &[0.0; 40], 8000, 0.95);
        assert_eq!((lo, hi), (0.8, 0.8));
        assert_eq!((q_lo, q_hi), (0.0, 0.0));
    }

    #[test]
    fn identical_refits_give_zero_width() {
        let c = [0.3, 1.8, 0.8];
        let r = bootstrap_region(c, &[Some([0.31, 1.7, 0.79]); 2], 0.95, 2).unwrap();
        assert_eq!(r.intervals(), [(0.3, 0.3), (1.8, 1.8), (0.8, 0.8)]);
        let r = bootstrap_region(
            c,
            &[Some([0.2, 1.6, 0.7]), Some([0.4, 2.0, 0.9]), None],
            0.95,
            2,
        )
        .unwrap();
        assert_eq!(r.dropped, 1);
        let sd = 0.1 * 2f64.sqrt();
        assert!((r.sigma.1 - (0.3 + 1.959963984540054 * sd)).abs() < 1e-12);
        assert!(bootstrap_region(c, &[None, None, Some(c)], 0.95, 2).is_err());
    }

    #[test]
    fn failure_threshold() {
        assert!(fail_check(5, 10).is_ok());
        assert_eq!(
            fail_check(6, 10).unwrap_err(),
            LfsmError::UnreliableRegion {
                failed: 6,
                total: 10
            }
        );
    }

    #[test]
    fn subsampling_rejects_non_dividing_groups() {
        let path = SamplePath::new((0..1000).map(|i| (i as f64).sin()).collect()).unwrap();
        let err =
            subsample_ci(&path, &SubsampleConfig::new(7), &EstimatorConfig::default()).unwrap_err();
        assert!(matches!(err, LfsmError::Config(_)));
    }

    #[test]
    fn bootstrap_rejects_single_resample() {
        let path = SamplePath::new((0..100).map(|i| (i as f64).sin()).collect()).unwrap();
        let boot = BootstrapConfig::new(1, RngStream::new(1, 0));
        assert!(matches!(
            bootstrap_ci(&path, &EstimatorConfig::default(), &boot),
            Err(LfsmError::Config(_))
        ));
    }

    proptest! {
        #[test]
        fn quantiles_are_ordered_and_reflect(
            dev in prop::collection::vec(-50.0f64..50.0, 2..120),
            center in -2.0f64..2.0,
        ) {
            let (lo, hi, q_lo, q_hi) = quantile_interval(center, &dev, 10_000, 0.95);
            prop_assert!(q_lo <= q_hi && lo <= hi);
            let flipped: Vec<f64> = dev.iter().map(|d| -d).collect();
            let (flo, fhi, _, _) = quantile_interval(center, &flipped, 10_000, 0.95);
            prop_assert!(((center - lo) - (fhi - center)).abs() <= 1e-12);
            prop_assert!(((hi - center) - (center - flo)).abs() <= 1e-12);
        }
    }
}
