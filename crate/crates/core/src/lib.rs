//! Occupation-measure stochastic control by Monte Carlo.
//!
//! Brownian particles accumulate an occupation measure; a terminal cost on
//! that measure defines a value function through a Feynman-Kac formula, an
//! explicit optimal drift, and a Gibbs law on paths. The modules build these
//! in order: [`occupation`], [`functionals`], [`feynman_kac`], [`control`],
//! [`dynamics`], with [`harness`] driving experiments from the command line.

pub mod control;
pub mod dynamics;
pub mod feynman_kac;
pub mod functionals;
pub mod harness;
pub mod occupation;
pub mod rng;
pub mod scalar;
pub mod stats;

pub use scalar::{Real, Scalar};

pub type Measure = occupation::OccupationMeasure<f64>;
pub type Ensemble = occupation::PathEnsemble<f64>;
pub type Grid = occupation::TimeGrid<f64>;
pub type Sausage = functionals::SausageFunctional<f64>;
pub type Mollifier = functionals::MollifierFamily<f64>;
pub type Cylindrical = functionals::CylindricalFunctional<f64>;
