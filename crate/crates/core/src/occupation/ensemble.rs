use serde::{Deserialize, Serialize};

use super::{MeasureError, OccupationMeasure};
use crate::rng::{NormalStream, Substreams};
use crate::scalar::Real;
use crate::stats::par_collect;

/// Uniform time grid `0 = t_0 < ... < t_M = T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "Vec<S>",
    into = "Vec<S>",
    bound(serialize = "S: Real + Serialize", deserialize = "S: Real + Deserialize<'de>")
)]
pub struct TimeGrid<S: Real> {
    horizon: S,
    steps: usize,
}

impl<S: Real> TimeGrid<S> {
    /// Grid of step `dt` on `[0, horizon]`; `dt` must divide `horizon`.
    pub fn uniform(horizon: S, dt: S) -> Result<Self, MeasureError> {
        if !(dt > S::zero()) || !dt.is_finite() {
            return Err(MeasureError::NegativeStep);
        }
        if horizon < S::zero() || !horizon.is_finite() {
            return Err(MeasureError::BadHorizon);
        }
        let ratio = horizon / dt;
        let steps = ratio.round();
        let tol = S::lit(1e-9) * ratio.max(S::one());
        if (ratio - steps).abs() > tol {
            return Err(MeasureError::StepDoesNotDivide);
        }
        Ok(Self {
            horizon,
            steps: steps.to_usize().unwrap_or(0),
        })
    }

    pub fn with_steps(horizon: S, steps: usize) -> Self {
        assert!(steps > 0 || horizon == S::zero());
        Self { horizon, steps }
    }

    #[inline]
    pub fn horizon(&self) -> S {
        self.horizon
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn dt(&self) -> S {
        if self.steps == 0 {
            S::zero()
        } else {
            self.horizon / S::from_usize_lossy(self.steps)
        }
    }

    #[inline]
    pub fn time(&self, i: usize) -> S {
        self.horizon * S::from_usize_lossy(i) / S::from_usize_lossy(self.steps.max(1))
    }

    pub fn times(&self) -> Vec<S> {
        (0..=self.steps).map(|i| self.time(i)).collect()
    }

    /// Grid over the tail `[t_i, T]`, re-based at zero.
    pub fn tail(&self, i: usize) -> Self {
        assert!(i <= self.steps);
        Self {
            horizon: self.dt() * S::from_usize_lossy(self.steps - i),
            steps: self.steps - i,
        }
    }
}

impl<S: Real> TryFrom<Vec<S>> for TimeGrid<S> {
    type Error = MeasureError;

    fn try_from(t: Vec<S>) -> Result<Self, Self::Error> {
        if t.len() < 2 || t[0] != S::zero() {
            return Err(MeasureError::BadHorizon);
        }
        let grid = Self::with_steps(t[t.len() - 1], t.len() - 1);
        let tol = S::lit(1e-9) * grid.horizon.max(S::one());
        if t.iter().enumerate().any(|(i, &s)| (s - grid.time(i)).abs() > tol) {
            return Err(MeasureError::NonUniformGrid);
        }
        Ok(grid)
    }
}

impl<S: Real> From<TimeGrid<S>> for Vec<S> {
    fn from(g: TimeGrid<S>) -> Self {
        g.times()
    }
}

/// Borrowed view of one `(M+1) x n x d` path, stored step-major.
#[derive(Clone, Copy, Debug)]
pub struct PathRef<'a, S> {
    data: &'a [S],
    n: usize,
    d: usize,
}

impl<'a, S: Real> PathRef<'a, S> {
    pub fn new(data: &'a [S], n: usize, d: usize) -> Self {
        assert!(n > 0 && d > 0 && data.len().is_multiple_of(n * d));
        Self { data, n, d }
    }

    /// Number of grid points `M + 1`.
    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / (self.n * self.d)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// All particle positions at grid index `i` (flat `n * d`).
    #[inline]
    pub fn at(&self, i: usize) -> &'a [S] {
        let w = self.n * self.d;
        &self.data[i * w..(i + 1) * w]
    }

    #[inline]
    pub fn particle(&self, i: usize, k: usize) -> &'a [S] {
        let w = self.n * self.d;
        &self.data[i * w + k * self.d..i * w + (k + 1) * self.d]
    }

    #[inline]
    pub fn terminal(&self) -> &'a [S] {
        self.at(self.len() - 1)
    }

    /// Left-endpoint atoms of steps `0..upto` (flat), each of weight `dt`.
    #[inline]
    pub fn atoms_before(&self, upto: usize) -> &'a [S] {
        &self.data[..upto * self.n * self.d]
    }

    /// `base + sum_{i < upto} dt * sum_k delta_{X^k_{t_i}}`.
    pub fn occupation(
        &self,
        base: &OccupationMeasure<S>,
        upto: usize,
        dt: S,
    ) -> OccupationMeasure<S> {
        let mut out = base.clone();
        out.push_segment(self.atoms_before(upto), dt)
            .expect("path dimension matches base");
        out
    }
}

/// Generator of driftless Brownian particle paths `x + B_t` on a grid.
#[derive(Clone, Debug)]
pub struct BrownianSampler<S: Real> {
    pub n_particles: usize,
    pub dim: usize,
    pub grid: TimeGrid<S>,
    pub initial: Vec<S>,
}

impl<S: Real> BrownianSampler<S> {
    pub fn new(initial: Vec<S>, n_particles: usize, grid: TimeGrid<S>) -> Self {
        assert!(n_particles > 0 && !initial.is_empty() && initial.len().is_multiple_of(n_particles));
        let dim = initial.len() / n_particles;
        Self {
            n_particles,
            dim,
            grid,
            initial,
        }
    }

    #[inline]
    pub fn path_len(&self) -> usize {
        (self.grid.steps() + 1) * self.n_particles * self.dim
    }

    /// Writes one path into `out`; increments are drawn step-major from `stream`.
    pub fn fill(&self, stream: &mut NormalStream, out: &mut [S]) {
        let w = self.n_particles * self.dim;
        let sq = self.grid.dt().sqrt();
        out[..w].copy_from_slice(&self.initial);
        for i in 0..self.grid.steps() {
            for c in 0..w {
                let z: S = stream.normal();
                out[(i + 1) * w + c] = out[i * w + c] + sq * z;
            }
        }
    }
}

/// `N` sampled n-particle d-dimensional paths on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Real + Serialize", deserialize = "S: Real + Deserialize<'de>"))]
pub struct PathEnsemble<S: Real> {
    pub dim: usize,
    pub n_particles: usize,
    pub seed: u64,
    pub time_grid: TimeGrid<S>,
    pub initial: Vec<S>,
    pub samples: Vec<Vec<S>>,
}

impl<S: Real> PathEnsemble<S> {
    /// Driftless ensemble; sample `i` uses substream `i` of `seed`.
    pub fn brownian(
        initial: Vec<S>,
        n_particles: usize,
        grid: TimeGrid<S>,
        n_samples: usize,
        seed: u64,
    ) -> Self {
        let sampler = BrownianSampler::new(initial, n_particles, grid);
        let streams = Substreams::new(seed);
        let samples = par_collect(n_samples, |i| {
            let mut buf = vec![S::zero(); sampler.path_len()];
            sampler.fill(&mut streams.stream(i as u64), &mut buf);
            buf
        });
        Self {
            dim: sampler.dim,
            n_particles,
            seed,
            time_grid: sampler.grid,
            initial: sampler.initial,
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn path(&self, i: usize) -> PathRef<'_, S> {
        PathRef::new(&self.samples[i], self.n_particles, self.dim)
    }

    /// Keeps every `factor`-th grid point.
    pub fn coarsen(&self, factor: usize) -> Result<Self, MeasureError> {
        let steps = self.time_grid.steps();
        if factor == 0 || !steps.is_multiple_of(factor) {
            return Err(MeasureError::StepDoesNotDivide);
        }
        let w = self.n_particles * self.dim;
        let samples = self
            .samples
            .iter()
            .map(|s| {
                (0..=steps / factor)
                    .flat_map(|i| s[i * factor * w..(i * factor + 1) * w].iter().copied())
                    .collect()
            })
            .collect();
        Ok(Self {
            time_grid: TimeGrid::with_steps(self.time_grid.horizon(), steps / factor),
            samples,
            ..self.clone()
        })
    }
}
