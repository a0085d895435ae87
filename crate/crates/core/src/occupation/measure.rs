use serde::{Deserialize, Serialize};

use super::MeasureError;
use crate::scalar::Scalar;

/// A finite, compactly supported measure stored as weighted atoms.
///
/// Used for base measures, occupation measures `nu + sum_k int delta_{X^k_s} ds`
/// and for pure path occupations (empty base). Weights are never negative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "MeasureRepr<S>",
    into = "MeasureRepr<S>",
    bound(
        serialize = "S: Scalar + Serialize",
        deserialize = "S: Scalar + Deserialize<'de>"
    )
)]
pub struct OccupationMeasure<S: Scalar> {
    dim: usize,
    points: Vec<S>,
    weights: Vec<S>,
}

/// Wire format: `{"dim": d, "atoms": [[[x1, .., xd], w], ...]}`.
#[derive(Serialize, Deserialize)]
pub struct MeasureRepr<S> {
    pub dim: usize,
    pub atoms: Vec<(Vec<S>, S)>,
}

impl<S: Scalar> TryFrom<MeasureRepr<S>> for OccupationMeasure<S> {
    type Error = MeasureError;

    fn try_from(repr: MeasureRepr<S>) -> Result<Self, Self::Error> {
        Self::from_atoms(repr.dim, repr.atoms)
    }
}

impl<S: Scalar> From<OccupationMeasure<S>> for MeasureRepr<S> {
    fn from(m: OccupationMeasure<S>) -> Self {
        let atoms = m.atoms().map(|(p, w)| (p.to_vec(), w)).collect();
        MeasureRepr { dim: m.dim, atoms }
    }
}

impl<S: Scalar> OccupationMeasure<S> {
    /// The zero measure on `R^dim`.
    pub fn empty(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            dim,
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, atoms: usize) -> Self {
        let mut m = Self::empty(dim);
        m.points.reserve(atoms * dim);
        m.weights.reserve(atoms);
        m
    }

    pub fn from_atoms<I>(dim: usize, atoms: I) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = (Vec<S>, S)>,
    {
        if dim == 0 {
            return Err(MeasureError::ZeroDimension);
        }
        let mut m = Self::empty(dim);
        for (p, w) in atoms {
            m.push_atom(&p, w)?;
        }
        Ok(m)
    }

    /// Single atom `weight * delta_point`.
    pub fn dirac(point: &[S], weight: S) -> Result<Self, MeasureError> {
        let mut m = Self::empty(point.len().max(1));
        m.push_atom(point, weight)?;
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of atoms.
    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[S] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn weight(&self, i: usize) -> S {
        self.weights[i]
    }

    /// Flat `len * dim` coordinate buffer.
    #[inline]
    pub fn points(&self) -> &[S] {
        &self.points
    }

    #[inline]
    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[S], S)> + '_ {
        self.points
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    pub fn total_mass(&self) -> S {
        self.weights.iter().fold(S::zero(), |a, &w| a + w)
    }

    /// `<mu, phi> = sum_i w_i phi(p_i)`.
    pub fn pair<F>(&self, phi: F) -> S
    where
        F: Fn(&[S]) -> S,
    {
        self.atoms().fold(S::zero(), |acc, (p, w)| acc + w * phi(p))
    }

    /// Componentwise min/max of the atom locations, `None` for the zero measure.
    pub fn bounding_box(&self) -> Option<(Vec<S>, Vec<S>)> {
        let mut it = self.points.chunks_exact(self.dim);
        let first = it.next()?;
        let mut lo = first.to_vec();
        let mut hi = first.to_vec();
        for p in it {
            for a in 0..self.dim {
                if p[a] < lo[a] {
                    lo[a] = p[a];
                }
                if p[a] > hi[a] {
                    hi[a] = p[a];
                }
            }
        }
        Some((lo, hi))
    }

    pub fn push_atom(&mut self, point: &[S], weight: S) -> Result<(), MeasureError> {
        if point.len() != self.dim {
            return Err(MeasureError::DimensionMismatch {
                expected: self.dim,
                got: point.len(),
            });
        }
        if weight < S::zero() {
            return Err(MeasureError::NegativeWeight);
        }
        self.points.extend_from_slice(point);
        self.weights.push(weight);
        Ok(())
    }

    /// Adds one time step of `n` particle positions (flat `n * dim`) with
    /// left-endpoint weight `dt` each.
    pub fn push_segment(&mut self, positions: &[S], dt: S) -> Result<(), MeasureError> {
        if dt < S::zero() {
            return Err(MeasureError::NegativeStep);
        }
        if !positions.len().is_multiple_of(self.dim) {
            return Err(MeasureError::DimensionMismatch {
                expected: self.dim,
                got: positions.len() % self.dim,
            });
        }
        self.points.extend_from_slice(positions);
        self.weights
            .extend(std::iter::repeat_n(dt, positions.len() / self.dim));
        Ok(())
    }

    /// Returns `mu + dt * sum_k delta_{positions_k}`; total mass grows by `n * dt`.
    pub fn append_occupation(&self, positions: &[S], dt: S) -> Result<Self, MeasureError> {
        let mut out = self.clone();
        out.push_segment(positions, dt)?;
        Ok(out)
    }

    /// Returns `mu + eps * delta_y`.
    pub fn perturb(&self, y: &[S], eps: S) -> Result<Self, MeasureError> {
        if eps < S::zero() {
            return Err(MeasureError::NegativePerturbation);
        }
        let mut out = self.clone();
        out.push_atom(y, eps)?;
        Ok(out)
    }

    /// Atom union `mu + other`.
    pub fn union(&self, other: &Self) -> Result<Self, MeasureError> {
        if other.dim != self.dim {
            return Err(MeasureError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut out = self.clone();
        out.points.extend_from_slice(&other.points);
        out.weights.extend_from_slice(&other.weights);
        Ok(out)
    }

    /// Pushforward under the translation `p -> p + v`.
    pub fn translated(&self, v: &[S]) -> Self {
        assert_eq!(v.len(), self.dim);
        let mut out = self.clone();
        for p in out.points.chunks_exact_mut(self.dim) {
            for (x, &s) in p.iter_mut().zip(v) {
                *x = *x + s;
            }
        }
        out
    }

    /// Scales every weight by `a >= 0`.
    pub fn scaled(&self, a: S) -> Result<Self, MeasureError> {
        if a < S::zero() {
            return Err(MeasureError::NegativeWeight);
        }
        let mut out = self.clone();
        for w in &mut out.weights {
            *w = *w * a;
        }
        Ok(out)
    }
}
