//! Extensive-form games with perfect recall: partition-function sampling over
//! exponentially many pure strategies and no-regret dynamics towards
//! normal-form correlated equilibria.

mod dynamics;
mod partition;
mod random;
mod tree;

pub use dynamics::{
    run_nfce_dynamics, verify_nfce, NfceCertificate, NfceConfig, NfceOutcome, StrategyProfileDist,
    NFCE_VERIFY_LIMIT,
};
pub use partition::{build_partition, sample_strategy, PartitionTables, TerminalWeights};
pub use random::{random_tree, RandomTreeConfig};
pub use tree::{eval_utility, GameTree, GameTreeBuilder, Infoset, Node, NodeKind, PureStrategy};
