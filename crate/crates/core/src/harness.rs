//! Monte Carlo experiments over a parameter grid, and path file I/O.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classic::{estimate_classic, TwoPointConfig};
use crate::contrast::{estimate_mce, EstimateResult, EstimatorConfig};
use crate::error::{LfsmError, Result};
use crate::model::LfsmParams;
use crate::simulate::{simulate_lfsm, SimConfig};
use crate::stable::RngStream;
use crate::stats::SamplePath;

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "LFSM_LAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Mce,
    Classic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorChoice {
    Mce,
    Classic,
    #[default]
    Both,
}

impl EstimatorChoice {
    pub fn estimators(self) -> &'static [Estimator] {
        match self {
            EstimatorChoice::Mce => &[Estimator::Mce],
            EstimatorChoice::Classic => &[Estimator::Classic],
            EstimatorChoice::Both => &[Estimator::Mce, Estimator::Classic],
        }
    }
}

fn default_mesh() -> usize {
    256
}

fn default_truncation() -> usize {
    600
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub grid: Vec<LfsmParams<f64>>,
    pub n: usize,
    pub reps: usize,
    #[serde(default)]
    pub estimator: EstimatorChoice,
    #[serde(default)]
    pub cfg: EstimatorConfig<f64>,
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default = "default_mesh")]
    pub mesh: usize,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default)]
    pub output: Option<String>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(LfsmError::Config("experiment grid is empty".into()));
        }
        if self.reps == 0 {
            return Err(LfsmError::Config("reps must be at least 1".into()));
        }
        for cell in &self.grid {
            cell.validate()?;
        }
        self.cfg.validate()?;
        self.sim_config(0, 0).validate()
    }

    /// Simulation settings for repetition `rep` of cell `cell`.
    pub fn sim_config(&self, cell: usize, rep: usize) -> SimConfig {
        let seed = RngStream::new(self.seed, 0)
            .derive(cell as u64)
            .derive(rep as u64);
        SimConfig {
            mesh: self.mesh,
            truncation: self.truncation,
            ..SimConfig::new(self.grid[cell], self.n, seed)
        }
    }

    fn classic_config(&self) -> TwoPointConfig<f64> {
        TwoPointConfig {
            p: self.cfg.p,
            k: self.cfg.k,
            ..TwoPointConfig::default()
        }
    }
}

/// Worker count: the explicit value, else [`THREADS_ENV`], else all cores.
pub fn resolve_threads(flag: Option<usize>) -> Result<usize> {
    if let Some(t) = flag {
        return Ok(t);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            LfsmError::Config(format!(
                "{THREADS_ENV} must be a non-negative integer, got {v:?}"
            ))
        }),
        Err(_) => Ok(0),
    }
}

/// One estimator run on one simulated path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawResult {
    pub cell: usize,
    pub rep: usize,
    pub estimator: Estimator,
    #[serde(with = "crate::scalar::nan_as_null")]
    pub sigma: f64,
    #[serde(with = "crate::scalar::nan_as_null")]
    pub alpha: f64,
    #[serde(with = "crate::scalar::nan_as_null")]
    pub hurst: f64,
    pub failed: bool,
    #[serde(default)]
    pub error: Option<String>,
}

impl RawResult {
    fn from_outcome(
        cell: usize,
        rep: usize,
        estimator: Estimator,
        outcome: Result<EstimateResult<f64>>,
    ) -> Self {
        match outcome {
            Ok(e) => Self {
                cell,
                rep,
                estimator,
                sigma: e.sigma,
                alpha: e.alpha,
                hurst: e.hurst,
                failed: is_failure(&e),
                error: None,
            },
            Err(err) => Self {
                cell,
                rep,
                estimator,
                sigma: f64::NAN,
                alpha: f64::NAN,
                hurst: f64::NAN,
                failed: true,
                error: Some(err.to_string()),
            },
        }
    }
}

/// An estimate counts as a failure unless it returns finite values with
/// `α ∈ (0, 2)`.
pub fn is_failure(e: &EstimateResult<f64>) -> bool {
    e.failed || !(e.alpha > 0.0 && e.alpha < 2.0) || !e.sigma.is_finite() || !e.hurst.is_finite()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub estimator: Estimator,
    /// `|mean - truth|` per coordinate `(σ, α, H)`.
    #[serde(with = "crate::scalar::nan_as_null_3")]
    pub bias: [f64; 3],
    pub sd: [f64; 3],
    pub failure_rate: f64,
    pub n_ok: usize,
    pub low_reps: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub params: LfsmParams<f64>,
    pub n: usize,
    pub reps: usize,
    /// `k < H + 1/α`.
    pub stable_regime: bool,
    pub summaries: Vec<Summary>,
}

impl CellRow {
    pub fn summary(&self, estimator: Estimator) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.estimator == estimator)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<CellRow>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloOutput {
    pub table: ResultTable,
    pub raw: Vec<RawResult>,
}

/// Simulates and fits every `(cell, rep)` pair on a worker pool. Each pair
/// draws from its own indexed stream, so the output does not depend on the
/// number of workers.
pub fn run_montecarlo(spec: &ExperimentSpec) -> Result<MonteCarloOutput> {
    spec.validate()?;
    let threads = resolve_threads(spec.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| LfsmError::Resource(e.to_string()))?;
    let tasks: Vec<(usize, usize)> = (0..spec.grid.len())
        .flat_map(|c| (0..spec.reps).map(move |r| (c, r)))
        .collect();
    let classic_cfg = spec.classic_config();
    let per_task: Vec<Result<Vec<RawResult>>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(cell, rep)| {
                let path = simulate_lfsm(&spec.sim_config(cell, rep))?;
                Ok(spec
                    .estimator
                    .estimators()
                    .iter()
                    .map(|&est| {
                        let outcome = match est {
                            Estimator::Mce => estimate_mce(&path, &spec.cfg),
                            Estimator::Classic => estimate_classic(&path, &classic_cfg),
                        };
                        RawResult::from_outcome(cell, rep, est, outcome)
                    })
                    .collect())
            })
            .collect()
    });
    let mut raw = Vec::with_capacity(tasks.len() * 2);
    for r in per_task {
        raw.extend(r?);
    }
    let table = aggregate(spec, &raw)?;
    Ok(MonteCarloOutput { table, raw })
}

/// Builds the result table from per-repetition results. Failures are
/// excluded from bias and standard deviation but counted in the rate.
pub fn aggregate(spec: &ExperimentSpec, raw: &[RawResult]) -> Result<ResultTable> {
    let mut rows = Vec::with_capacity(spec.grid.len());
    let mut warnings = Vec::new();
    for (cell, params) in spec.grid.iter().enumerate() {
        let mut summaries = Vec::new();
        for &est in spec.estimator.estimators() {
            let runs: Vec<&RawResult> = raw
                .iter()
                .filter(|r| r.cell == cell && r.estimator == est)
                .collect();
            if runs.is_empty() {
                return Err(LfsmError::Config(format!(
                    "no results for cell {cell} and estimator {est:?}"
                )));
            }
            let ok: Vec<[f64; 3]> = runs
                .iter()
                .filter(|r| !r.failed)
                .map(|r| [r.sigma, r.alpha, r.hurst])
                .collect();
            let truth = [params.sigma, params.alpha, params.hurst];
            let mut bias = [f64::NAN; 3];
            let mut sd = [0.0; 3];
            for j in 0..3 {
                if ok.is_empty() {
                    continue;
                }
                let mean = ok.iter().map(|v| v[j]).sum::<f64>() / ok.len() as f64;
                bias[j] = (mean - truth[j]).abs();
                if ok.len() > 1 {
                    let ss: f64 = ok.iter().map(|v| (v[j] - mean).powi(2)).sum();
                    sd[j] = (ss / (ok.len() - 1) as f64).sqrt();
                }
            }
            let low_reps = ok.len() < 2;
            if low_reps {
                warnings.push(format!(
                    "cell {cell} ({}, {}, {}), {est:?}: {} successful reps, s.d. reported as 0",
                    params.sigma,
                    params.alpha,
                    params.hurst,
                    ok.len()
                ));
            }
            summaries.push(Summary {
                estimator: est,
                bias,
                sd,
                failure_rate: (runs.len() - ok.len()) as f64 / runs.len() as f64,
                n_ok: ok.len(),
                low_reps,
            });
        }
        rows.push(CellRow {
            params: *params,
            n: spec.n,
            reps: spec.reps,
            stable_regime: (spec.cfg.k as f64) < params.hurst + 1.0 / params.alpha,
            summaries,
        });
    }
    Ok(ResultTable { rows, warnings })
}

/// Reads a path: one value per line, with an optional `x` header.
pub fn read_path_csv<R: BufRead>(reader: R) -> Result<SamplePath<f64>> {
    let mut values = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let field = line.trim();
        if field.is_empty() || (i == 0 && field == "x") {
            continue;
        }
        let v: f64 = field.parse().map_err(|_| LfsmError::Parse {
            line: i + 1,
            msg: format!("not a number: {field:?}"),
        })?;
        if !v.is_finite() {
            return Err(LfsmError::Parse {
                line: i + 1,
                msg: format!("non-finite value {field:?}"),
            });
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(LfsmError::Parse {
            line: 0,
            msg: "no observations".into(),
        });
    }
    SamplePath::new(values)
}

/// Writes a path with an `x` header; values round-trip exactly.
pub fn write_path_csv<W: Write>(path: &SamplePath<f64>, mut out: W) -> Result<()> {
    writeln!(out, "x")?;
    for v in path.values() {
        writeln!(out, "{v}")?;
    }
    out.flush()?;
    Ok(())
}
