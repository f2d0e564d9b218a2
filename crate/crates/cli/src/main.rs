use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use lfsm_core::classic::{estimate_classic, TwoPointConfig};
use lfsm_core::contrast::{estimate_mce, estimate_mce_with_hurst};
use lfsm_core::harness::{read_path_csv, run_montecarlo, write_path_csv, ExperimentSpec};
use lfsm_core::inference::{bootstrap_ci, subsample_ci, BootstrapConfig, SubsampleConfig};
use lfsm_core::model::{alpha_norm, beta_coeff, kernel_h, q_factor, KernelSpec};
use lfsm_core::oracle::{kappa1, kappa2, phi1_r, phi_bar, rho_l, KAPPA_MESH};
use lfsm_core::simulate::simulate_lfsm;
use lfsm_core::stable::a_p_constant;
use lfsm_core::{Config, LfsmError, Params, Path, RngStream, SimConfig};

#[derive(Parser)]
#[command(
    name = "lfsm-lab",
    version,
    about = "Simulate and estimate linear fractional stable motion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a path and write it as CSV.
    Simulate(SimulateArgs),
    /// Minimal contrast estimate of (σ, α, H).
    Estimate(EstimateArgs),
    /// Two-point closed-form estimate of (σ, α, H).
    EstimateClassic(ClassicArgs),
    /// Parametric bootstrap confidence intervals.
    Bootstrap(BootstrapArgs),
    /// Subsampling confidence intervals.
    Subsample(SubsampleArgs),
    /// Monte Carlo study over a parameter grid.
    Montecarlo(MonteCarloArgs),
    /// Evaluate model and limit-theory quantities.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    hurst: f64,
}

impl ParamArgs {
    fn params(&self) -> lfsm_core::Result<Params> {
        Params::new(self.sigma, self.alpha, self.hurst)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long, default_value_t = 256)]
    mesh: usize,
    #[arg(long, default_value_t = 600)]
    truncation: usize,
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EstimatorArgs {
    #[arg(long, default_value_t = -0.4, allow_negative_numbers = true)]
    p: f64,
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long, default_value_t = 0.1)]
    nu: f64,
    #[arg(long, default_value_t = 12)]
    quad_order: usize,
}

impl EstimatorArgs {
    fn config(&self) -> Config {
        Config {
            p: self.p,
            k: self.k,
            nu: self.nu,
            quad_order: self.quad_order,
            ..Config::default()
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    path: PathBuf,
    #[command(flatten)]
    est: EstimatorArgs,
    /// Use this H instead of the power-variation estimate.
    #[arg(long)]
    hurst: Option<f64>,
}

#[derive(Args)]
struct ClassicArgs {
    path: PathBuf,
    #[arg(long, default_value_t = -0.4, allow_negative_numbers = true)]
    p: f64,
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long, default_value_t = 1.0)]
    t1: f64,
    #[arg(long, default_value_t = 2.0)]
    t2: f64,
}

#[derive(Args)]
struct BootstrapArgs {
    path: PathBuf,
    #[command(flatten)]
    est: EstimatorArgs,
    #[arg(long, default_value_t = 100)]
    resamples: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    mesh: usize,
    #[arg(long, default_value_t = 600)]
    truncation: usize,
}

#[derive(Args)]
struct SubsampleArgs {
    path: PathBuf,
    #[command(flatten)]
    est: EstimatorArgs,
    #[arg(long)]
    groups: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

#[derive(Args)]
struct MonteCarloArgs {
    spec: PathBuf,
    /// Result table file; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write the per-repetition results here.
    #[arg(long)]
    raw: Option<PathBuf>,
    /// Worker threads; overrides LFSM_LAB_THREADS and the spec.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(subcommand)]
    quantity: Quantity,
}

#[derive(Subcommand)]
enum Quantity {
    /// ‖h_k‖_α together with q and β.
    Norm {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        hurst: f64,
        #[arg(long, default_value_t = 2)]
        k: u32,
    },
    /// The kernel h_{k,r}(x).
    Kernel {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        hurst: f64,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, default_value_t = 1)]
        r: u32,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
    },
    /// The power-variation constant a_p.
    Ap {
        #[arg(long, allow_negative_numbers = true)]
        p: f64,
    },
    /// ρ_l = ∫|h_k(x) h_k(x+l)|^{α/2} dx.
    Rho {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        hurst: f64,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, allow_negative_numbers = true)]
        l: i64,
    },
    /// Φ¹_r(x).
    Phi1 {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, default_value_t = 1)]
        r: u32,
        #[arg(long, default_value_t = -0.4, allow_negative_numbers = true)]
        p: f64,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
    },
    /// κ₁(r).
    Kappa1 {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, default_value_t = 1)]
        r: u32,
        #[arg(long, default_value_t = -0.4, allow_negative_numbers = true)]
        p: f64,
        #[arg(long, default_value_t = KAPPA_MESH)]
        mesh: f64,
    },
    /// κ₂(t).
    Kappa2 {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long)]
        t: f64,
    },
    /// Φ̄_t(x).
    PhiBar {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long)]
        t: f64,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
    },
}

/// Errors that end the process: the library error plus a flag for
/// estimator failures that are not library errors.
enum Failure {
    Lib(LfsmError),
    Estimation(String),
}

impl From<LfsmError> for Failure {
    fn from(e: LfsmError) -> Self {
        Failure::Lib(e)
    }
}

type CliResult = Result<(), Failure>;

fn error_kind(e: &LfsmError) -> &'static str {
    match e {
        LfsmError::InvalidParameter(_) => "invalid_parameter",
        LfsmError::Domain(_) => "domain",
        LfsmError::InsufficientData { .. } => "insufficient_data",
        LfsmError::DegenerateIncrement(_) => "degenerate_increment",
        LfsmError::EstimationFailed(_) => "estimation_failed",
        LfsmError::UnreliableRegion { .. } => "unreliable_region",
        LfsmError::Config(_) => "config",
        LfsmError::Resource(_) => "resource",
        LfsmError::Parse { .. } => "parse",
        LfsmError::Io(_) => "io",
    }
}

fn report(f: Failure) -> ExitCode {
    let (body, code) = match f {
        Failure::Lib(e) => {
            let mut body = json!({ "error": error_kind(&e), "message": e.to_string() });
            if let LfsmError::Parse { line, .. } = &e {
                body["line"] = json!(line);
            }
            (body, if e.is_validation() { 2 } else { 3 })
        }
        Failure::Estimation(msg) => (json!({ "error": "estimation_failed", "message": msg }), 3),
    };
    eprintln!("{body}");
    ExitCode::from(code)
}

fn read_path(file: &FsPath) -> lfsm_core::Result<Path> {
    let f = File::open(file).map_err(|e| LfsmError::Io(format!("{}: {e}", file.display())))?;
    read_path_csv(BufReader::new(f))
}

fn create(file: &FsPath) -> lfsm_core::Result<BufWriter<File>> {
    let f = File::create(file).map_err(|e| LfsmError::Io(format!("{}: {e}", file.display())))?;
    Ok(BufWriter::new(f))
}

fn emit<T: Serialize>(value: &T, file: Option<&FsPath>) -> lfsm_core::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| LfsmError::Io(e.to_string()))?;
    match file {
        Some(f) => {
            let mut w = create(f)?;
            writeln!(w, "{text}")?;
            w.flush()?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> CliResult {
    let cfg = SimConfig {
        mesh: a.mesh,
        truncation: a.truncation,
        ..SimConfig::new(a.params.params()?, a.n, RngStream::new(a.seed, a.stream))
    };
    let path = simulate_lfsm(&cfg)?;
    match &a.output {
        Some(f) => write_path_csv(&path, create(f)?)?,
        None => write_path_csv(&path, io::stdout().lock())?,
    }
    Ok(())
}

fn estimate(a: EstimateArgs) -> CliResult {
    let path = read_path(&a.path)?;
    let cfg = a.est.config();
    let result = match a.hurst {
        Some(h) => estimate_mce_with_hurst(&path, h, &cfg)?,
        None => estimate_mce(&path, &cfg)?,
    };
    emit(&result, None)?;
    if result.failed {
        return Err(Failure::Estimation("minimal contrast fit failed".into()));
    }
    Ok(())
}

fn estimate_classic_cmd(a: ClassicArgs) -> CliResult {
    let path = read_path(&a.path)?;
    let cfg = TwoPointConfig {
        t1: a.t1,
        t2: a.t2,
        p: a.p,
        k: a.k,
    };
    let result = estimate_classic(&path, &cfg)?;
    emit(&result, None)?;
    if result.failed {
        return Err(Failure::Estimation(
            "two-point estimator returned no value".into(),
        ));
    }
    Ok(())
}

fn bootstrap(a: BootstrapArgs) -> CliResult {
    let path = read_path(&a.path)?;
    let boot = BootstrapConfig {
        level: a.level,
        mesh: a.mesh,
        truncation: a.truncation,
        ..BootstrapConfig::new(a.resamples, RngStream::new(a.seed, 0))
    };
    emit(&bootstrap_ci(&path, &a.est.config(), &boot)?, None)?;
    Ok(())
}

fn subsample(a: SubsampleArgs) -> CliResult {
    let path = read_path(&a.path)?;
    let sub = SubsampleConfig {
        level: a.level,
        ..SubsampleConfig::new(a.groups)
    };
    emit(&subsample_ci(&path, &sub, &a.est.config())?, None)?;
    Ok(())
}

fn montecarlo(a: MonteCarloArgs) -> CliResult {
    let text = std::fs::read_to_string(&a.spec)
        .map_err(|e| LfsmError::Io(format!("{}: {e}", a.spec.display())))?;
    let mut spec: ExperimentSpec = serde_json::from_str(&text).map_err(LfsmError::from)?;
    if a.threads.is_some() {
        spec.threads = a.threads;
    }
    let out = run_montecarlo(&spec)?;
    for w in &out.table.warnings {
        log::warn!("{w}");
    }
    let target = a.output.or_else(|| spec.output.as_ref().map(PathBuf::from));
    emit(&out.table, target.as_deref())?;
    if let Some(raw) = &a.raw {
        emit(&out.raw, Some(raw))?;
    }
    Ok(())
}

fn oracle(a: OracleArgs) -> CliResult {
    let value = match a.quantity {
        Quantity::Norm { alpha, hurst, k } => {
            let xi = Params::new(1.0, alpha, hurst)?;
            KernelSpec::from_params(&xi, k, 1)?;
            json!({
                "norm": alpha_norm(k, &xi),
                "q": q_factor(&xi, k),
                "beta": beta_coeff(&xi, k),
            })
        }
        Quantity::Kernel {
            alpha,
            hurst,
            k,
            r,
            x,
        } => {
            let spec = KernelSpec::new(k, r, alpha, hurst)?;
            json!({ "h": kernel_h(&spec, x) })
        }
        Quantity::Ap { p } => json!({ "a_p": a_p_constant(p)? }),
        Quantity::Rho { alpha, hurst, k, l } => {
            json!({ "rho": rho_l(k, &Params::new(1.0, alpha, hurst)?, l)? })
        }
        Quantity::Phi1 { params, k, r, p, x } => {
            json!({ "phi1": phi1_r(r, x, &params.params()?, k, p)? })
        }
        Quantity::Kappa1 {
            params,
            k,
            r,
            p,
            mesh,
        } => {
            json!({ "kappa1": kappa1(r, &params.params()?, k, p, mesh)? })
        }
        Quantity::Kappa2 { params, k, t } => json!({ "kappa2": kappa2(t, &params.params()?, k)? }),
        Quantity::PhiBar { params, k, t, x } => {
            json!({ "phi_bar": phi_bar(t, x, &params.params()?, k)? })
        }
    };
    emit(&value, None)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": "usage", "message": e.to_string() }));
            return ExitCode::from(2);
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::EstimateClassic(a) => estimate_classic_cmd(a),
        Command::Bootstrap(a) => bootstrap(a),
        Command::Subsample(a) => subsample(a),
        Command::Montecarlo(a) => montecarlo(a),
        Command::Oracle(a) => oracle(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}
