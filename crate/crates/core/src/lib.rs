pub mod classic;
pub mod contrast;
pub mod error;
pub mod harness;
pub mod inference;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod scalar;
pub mod simulate;
pub mod stable;
pub mod stats;

pub use contrast::{EstimateResult, EstimatorConfig, NelderMeadOptions, QuadRule};
pub use error::{LfsmError, Result};
pub use model::{KernelSpec, LfsmParams, Regime};
pub use scalar::Real;
pub use simulate::SimConfig;
pub use stable::{RngStream, StableLaw};
pub use stats::{HurstEstimate, IncrementSeries, PathMeta, SamplePath};

pub type Params = LfsmParams<f64>;
pub type Path = SamplePath<f64>;
pub type Config = EstimatorConfig<f64>;
pub type Estimate = EstimateResult<f64>;
