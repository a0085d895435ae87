//! Discrete finite measures built from a base measure plus particle
//! occupation, and the sampled Brownian paths that generate them.

mod ensemble;
mod index;
mod measure;

pub use ensemble::{BrownianSampler, PathEnsemble, PathRef, TimeGrid};
pub use index::SpatialIndex;
pub use measure::{MeasureRepr, OccupationMeasure};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeasureError {
    #[error("measure dimension must be positive")]
    ZeroDimension,
    #[error("point has dimension {got}, measure has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("atom weights must be nonnegative")]
    NegativeWeight,
    #[error("time step must be positive")]
    NegativeStep,
    #[error("perturbation size must be nonnegative")]
    NegativePerturbation,
    #[error("horizon must be finite and nonnegative")]
    BadHorizon,
    #[error("time step does not divide the horizon")]
    StepDoesNotDivide,
    #[error("time grid is not uniform")]
    NonUniformGrid,
}
