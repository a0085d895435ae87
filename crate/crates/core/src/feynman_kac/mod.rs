//! Monte Carlo value functions: `u = E[exp(-g - int f)]`, `c = -log u`,
//! the cost of an arbitrary control, and the Ito residual check.

mod costs;
mod euler;
mod ito;

pub use costs::{
    Certificate, CostPair, DerivativeBounds, PathCost, PreparedCosts, Running, Terminal,
    TerminalKind, Workspace,
};
pub use euler::{control_cost, euler_maruyama, ConstantPolicy, ControlledPath, Policy};
pub use ito::{ito_residual, ItoFunctional, SpaceTime};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functionals::FunctionalError;
use crate::occupation::{BrownianSampler, MeasureError, OccupationMeasure, PathRef, TimeGrid};
use crate::rng::Substreams;
use crate::scalar::Real;
use crate::stats::{mean_and_se, par_collect_with};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeynmanKacError {
    #[error("sample {sample}: non-finite weight (log-weight {log_weight})")]
    NonFiniteWeight { sample: usize, log_weight: f64 },
    #[error("sample {sample}: log-weight {log_weight} exceeds its certificate {bound}")]
    CertificateViolated {
        sample: usize,
        log_weight: f64,
        bound: f64,
    },
    #[error("sample {sample}, step {step}: non-finite drift at t = {t}, x = {state:?}")]
    NonFiniteDrift {
        sample: usize,
        step: usize,
        t: f64,
        state: Vec<f64>,
    },
    #[error("start time must lie in [0, T]")]
    BadStartTime,
    #[error("starting point has {got} coordinates, expected a multiple of the dimension {dim}")]
    BadStartingPoint { got: usize, dim: usize },
    #[error("at least one sample is required")]
    NoSamples,
    #[error("terminal cost has no derivative")]
    NotDifferentiable,
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
}

/// A Monte Carlo point estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate<S> {
    pub mean: S,
    pub std_error: S,
    pub n_samples: usize,
    pub seed: u64,
}

/// Sample count, time step and seed of one estimator call.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sampling<S> {
    pub n_samples: usize,
    pub dt: S,
    pub seed: u64,
}

/// Log-weights summarised in log space: `sum exp(lw) = exp(shift) * sum w`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogWeights<S> {
    pub log_weights: Vec<S>,
    pub shift: S,
}

impl<S: Real> LogWeights<S> {
    pub fn new(log_weights: Vec<S>) -> Self {
        let shift = log_weights
            .iter()
            .copied()
            .fold(S::neg_infinity(), S::max);
        Self { log_weights, shift }
    }

    /// `exp(lw - shift)`, all in `(0, 1]`.
    pub fn scaled(&self) -> Vec<S> {
        self.log_weights.iter().map(|&l| (l - self.shift).exp()).collect()
    }
}

pub(crate) fn particles<S: Real>(nu: &OccupationMeasure<S>, x: &[S]) -> Result<usize, FeynmanKacError> {
    let dim = nu.dim();
    if x.is_empty() || !x.len().is_multiple_of(dim) {
        return Err(FeynmanKacError::BadStartingPoint { got: x.len(), dim });
    }
    Ok(x.len() / dim)
}

pub fn tail_grid<S: Real>(horizon: S, t: S, dt: S) -> Result<TimeGrid<S>, FeynmanKacError> {
    if !(t >= S::zero() && t <= horizon) {
        return Err(FeynmanKacError::BadStartTime);
    }
    Ok(TimeGrid::uniform(horizon - t, dt)?)
}

/// Outcome of one driftless sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<S> {
    pub log_weight: S,
    /// `G` per particle when requested
    pub gradient: Vec<S>,
}

/// Evaluates `-int f - g` (and optionally `G`) on `n_samples` driftless
/// paths from `x` over `grid`, with base measure `nu`. Sample `i` uses
/// stream `i` of `streams`. Every log-weight is checked against the
/// certificates of the costs.
pub fn driftless_samples<S: Real>(
    costs: &CostPair<S>,
    grid: &TimeGrid<S>,
    nu: &OccupationMeasure<S>,
    x: &[S],
    n_samples: usize,
    streams: Substreams,
    gradient: bool,
) -> Result<Vec<Sample<S>>, FeynmanKacError> {
    if n_samples == 0 {
        return Err(FeynmanKacError::NoSamples);
    }
    let n = particles(nu, x)?;
    let prepared = costs.prepare(nu);
    let sampler = BrownianSampler::new(x.to_vec(), n, grid.clone());
    let dt = grid.dt();
    let out = par_collect_with(
        n_samples,
        || (Workspace::new(), vec![S::zero(); sampler.path_len()]),
        |(ws, buf), i| {
            sampler.fill(&mut streams.stream(i as u64), buf);
            let path = PathRef::new(buf, n, nu.dim());
            let cost = prepared.evaluate(&path, n, dt, gradient, ws)?;
            let log_weight = cost.log_weight();
            check_weight(&prepared, &path, dt, i, log_weight)?;
            Ok(Sample {
                log_weight,
                gradient: ws.gradient().to_vec(),
            })
        },
    );
    out.into_iter().collect()
}

fn check_weight<S: Real>(
    prepared: &PreparedCosts<'_, S>,
    path: &PathRef<'_, S>,
    dt: S,
    sample: usize,
    log_weight: S,
) -> Result<(), FeynmanKacError> {
    if !log_weight.is_finite() {
        return Err(FeynmanKacError::NonFiniteWeight {
            sample,
            log_weight: log_weight.as_f64(),
        });
    }
    if let Some(bound) = prepared.log_weight_bound(path, dt) {
        let tol = S::lit(1e-9) * (S::one() + bound.abs());
        if log_weight > bound + tol {
            return Err(FeynmanKacError::CertificateViolated {
                sample,
                log_weight: log_weight.as_f64(),
                bound: bound.as_f64(),
            });
        }
    }
    Ok(())
}

/// Log-weights `-int_0^{T-t} f - g` of the driftless samples behind
/// [`estimate_u`].
pub fn sample_log_weights<S: Real>(
    costs: &CostPair<S>,
    horizon: S,
    t: S,
    nu: &OccupationMeasure<S>,
    x: &[S],
    sampling: &Sampling<S>,
) -> Result<LogWeights<S>, FeynmanKacError> {
    let grid = tail_grid(horizon, t, sampling.dt)?;
    let samples = driftless_samples(
        costs,
        &grid,
        nu,
        x,
        sampling.n_samples,
        Substreams::new(sampling.seed),
        false,
    )?;
    Ok(LogWeights::new(samples.into_iter().map(|s| s.log_weight).collect()))
}

/// `u(t, nu, x) = E[exp(-g(nu + theta_{T-t}, x + B_{T-t}) - int_0^{T-t} f ds)]`.
pub fn estimate_u<S: Real>(
    costs: &CostPair<S>,
    horizon: S,
    t: S,
    nu: &OccupationMeasure<S>,
    x: &[S],
    sampling: &Sampling<S>,
) -> Result<MCEstimate<S>, FeynmanKacError> {
    let lw = sample_log_weights(costs, horizon, t, nu, x, sampling)?;
    let (m, se) = mean_and_se(&lw.scaled());
    let scale = lw.shift.exp();
    Ok(MCEstimate {
        mean: scale * m,
        std_error: scale * se,
        n_samples: sampling.n_samples,
        seed: sampling.seed,
    })
}

/// `c = -log u`, with delta-method standard error `se_u / u`.
///
/// The plug-in logarithm carries a bias of order `se^2`.
pub fn estimate_c<S: Real>(
    costs: &CostPair<S>,
    horizon: S,
    t: S,
    nu: &OccupationMeasure<S>,
    x: &[S],
    sampling: &Sampling<S>,
) -> Result<MCEstimate<S>, FeynmanKacError> {
    let lw = sample_log_weights(costs, horizon, t, nu, x, sampling)?;
    Ok(log_mean(&lw, sampling))
}

/// `-log mean(exp(lw))` and its delta-method standard error.
pub(crate) fn log_mean<S: Real>(lw: &LogWeights<S>, sampling: &Sampling<S>) -> MCEstimate<S> {
    let (m, se) = mean_and_se(&lw.scaled());
    MCEstimate {
        mean: -(lw.shift + m.ln()),
        std_error: se / m,
        n_samples: sampling.n_samples,
        seed: sampling.seed,
    }
}
