//! Scenarios, co-simulation of both backends, metrics, export and the
//! acceptance checks.

pub mod acceptance;
pub mod compare;
pub mod export;
pub mod metrics;
pub mod scenario;

pub use crate::cycle::{analytic_limit_cycle, LimitCycle};
pub use compare::{run_comparison, Comparison, ComparisonReport};
pub use export::export_results;
pub use scenario::{load_scenario, parse_scenario, Scenario, ScenarioError, SignalSpec};

use thiserror::Error;

use crate::cycle::CycleError;
use crate::fvm::FvmError;
use crate::mc::SimError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Fvm(#[from] FvmError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Cycle(#[from] CycleError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("incomplete comparison: {0}")]
    Incomplete(String),
}
