//! Optimally controlled particles, the Gibbs law of optimal trajectories,
//! and the statistical comparison of the two.

mod gibbs;
mod laws;
mod optimal;

pub use gibbs::{
    sample_gibbs, weighted_paths, GibbsReport, PathStatistic, StatEstimate, StatisticSet,
    WeightedPathSample, MIN_ESS,
};
pub use laws::{law_equality_test, summarize_trajectories, LawComparison, LawConfig, LawSummary, Z_THRESHOLD};
pub use optimal::{simulate_ensemble, simulate_optimal, ControlledTrajectory, OptimalConfig};

use thiserror::Error;

use crate::control::ControlError;
use crate::feynman_kac::FeynmanKacError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("drift estimate failed at step {step}: {source}")]
    Drift { step: usize, source: ControlError },
    #[error("law comparison between different configurations: {0}")]
    Mismatch(String),
    #[error(transparent)]
    FeynmanKac(#[from] FeynmanKacError),
}
