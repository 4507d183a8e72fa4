pub mod aoi;
pub mod baselines;
pub mod bler;
pub mod cli;
pub mod error;
pub mod model;
pub mod optimizer;
pub mod simulator;
pub mod stats;

pub use error::{ConfigError, Error, Result, SolverError};
