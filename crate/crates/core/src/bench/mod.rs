//! Desk-scale benchmark: synthetic multi-domain data, comparison strategies,
//! a logistic downstream classifier, and accuracy-versus-budget reports.

mod baselines;
mod classifier;
mod harness;
mod synth;

use thiserror::Error;

pub use baselines::{baseline_select, checked_budget, farthest_first, BaselinePool, Strategy};
pub use classifier::{ClassifierConfig, LinearClassifier};
pub use harness::{
    cluster_ablation, evaluate, paired_sign_test, run_bench, BenchCell, BenchConfig, BenchResult,
    BenchRun, BenchSetup, LabeledPool, SignTest,
};
pub use synth::{generate, SyntheticData, SyntheticSpec, SOURCE_DOMAIN, TEST_FRACTION};

use crate::dataio::DataError;
use crate::reconproxy::ReconError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid bench config: {0}")]
    InvalidConfig(String),
    #[error("budget {budget} exceeds pool of {pool}")]
    BudgetExceedsPool { budget: usize, pool: usize },
    #[error("unknown pool id {0:?}")]
    UnknownId(String),
    #[error("selection is empty")]
    EmptySelection,
    #[error("strategy {0} needs a trained classifier")]
    MissingClassifier(Strategy),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Recon(#[from] ReconError),
}
