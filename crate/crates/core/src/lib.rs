//! No-regret learning with swap-regret guarantees.
//!
//! * [`regret`] and [`mwu`]: strategies, reward streams, exact external/swap
//!   regret, and multiplicative weights.
//! * [`multiscale`]: the multi-scale MWU learner and its deterministic
//!   per-stream swap-regret bound.
//! * [`adversaries`]: the depth-first hard sequence, the two-coin game and
//!   stress adversaries.
//! * [`nfg`]: normal-form games, uncoupled dynamics and exact CE verification.
//! * [`comm`]: the two-party bit-metered protocol and CE sparsification.
//! * [`efg`]: extensive-form games, partition-function sampling and NFCE dynamics.
//! * [`exec`]: data-parallel batch execution with a sequential fallback.

pub mod adversaries;
pub mod comm;
pub mod efg;
pub mod error;
pub mod exec;
pub mod multiscale;
pub mod mwu;
pub mod nfg;
pub mod numeric;
pub mod regret;

pub use error::{Error, Result};
pub use exec::Execution;
pub use multiscale::{multiscale_bound, MultiScaleConfig, MultiScaleLearner};
pub use mwu::{Learner, Mwu, UniformLearner};
pub use regret::{
    external_regret, regret_report, swap_regret, ActionDistribution, PlayRecord, RegretReport,
    RegretTracker, RewardVector, SwapFunction,
};
