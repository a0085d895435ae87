//! Functionals on occupation measures: the mollified sausage functional and
//! its derivatives, exact sausage volumes, and cylindrical test functionals.

mod chain_rule;
mod cylindrical;
mod lattice;
mod mollifier;
mod sausage;
mod volume;

pub use chain_rule::chain_rule_residual;
pub use cylindrical::{
    Affine, CylindricalFunctional, DerivativeField, OuterFunction, Plateau, Product, Square,
    TestFunction,
};
pub use mollifier::{unit_sphere_area, MollifierFamily, MollifierValue};
pub use sausage::{PreparedBase, SausageBounds, SausageFunctional, SausageScratch};
pub use volume::{particle_polylines, sausage_volume, Support, VolumeEstimate};

use thiserror::Error;

use crate::occupation::OccupationMeasure;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FunctionalError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error(transparent)]
    Measure(#[from] crate::occupation::MeasureError),
}

/// A functional of a measure together with its linear (flat) derivative.
pub trait FlatFunctional<S: Real>: Send + Sync {
    fn value(&self, mu: &OccupationMeasure<S>) -> S;
    fn delta(&self, mu: &OccupationMeasure<S>, y: &[S]) -> S;
}

impl<S: Real> FlatFunctional<S> for SausageFunctional<S> {
    fn value(&self, mu: &OccupationMeasure<S>) -> S {
        self.g_ell(mu)
    }

    fn delta(&self, mu: &OccupationMeasure<S>, y: &[S]) -> S {
        self.delta_mu_g(mu, y)
    }
}
