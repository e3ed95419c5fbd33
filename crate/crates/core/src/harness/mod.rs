//! Experiment configuration, benchmark registry, baselines and metrics.

mod bench;
mod config;
mod epsmin;
mod maqrm;
mod nvi;

pub use bench::{run_benchmark, run_one, BenchRow, RunResult};
pub use config::{
    benchmark, benchmark_ids, Algorithm, ConfigError, EnvSpec, ExperimentConfig, HyperParams,
};
pub use epsmin::{epsilon_min, EpsMinParams, FrozenOpponent};
pub use maqrm::{run_maqrm, MaqrmPolicy};
pub use nvi::{run_nvi, NviPolicy};
