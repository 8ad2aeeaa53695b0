//! Seeded experiment runner for the `swapregret` library.
//!
//! Every experiment is a pure function of `(config, seed)`: randomness is
//! drawn from streams derived from the global seed by fixed labels, so runs
//! are byte-for-byte reproducible and adding an experiment never shifts the
//! streams of another.

pub mod config;
pub mod error;
pub mod experiments;
pub mod restart;

pub use config::{ConfigFile, ExperimentConfig, ExperimentKind, Params};
pub use error::{CliError, CliResult};
pub use experiments::{run_experiment, Report};
pub use restart::{restart_wrapper, Restarting};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "SWAPREGRET_WORKERS";
