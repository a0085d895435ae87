use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::control::{drift_bound, drift_on_grid, DriftEstimate, DriftOptions};
use crate::feynman_kac::{euler_maruyama, particles, CostPair, Workspace};
use crate::occupation::{OccupationMeasure, PathRef, TimeGrid};
use crate::rng::Substreams;
use crate::scalar::Real;
use crate::stats::par_collect;

/// Settings of the optimally controlled simulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalConfig<S> {
    pub dt: S,
    pub n_inner: usize,
    pub seed: u64,
    /// clip every drift estimate at the bound `C_T`
    pub clip: bool,
}

/// One trajectory of the optimally controlled particle system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Real + Serialize", deserialize = "S: Real + Deserialize<'de>"))]
pub struct ControlledTrajectory<S: Real> {
    pub n_particles: usize,
    /// `(M+1) x n x d`, step-major
    pub path: Vec<S>,
    pub occupation: OccupationMeasure<S>,
    /// drift used at each step
    pub drift_log: Vec<DriftEstimate<S>>,
    pub terminal_cost: S,
    pub running_cost: S,
    /// `1/2 sum_k int |alpha^k|^2`
    pub control_energy: S,
    /// bound `C_T` the drifts are certified against, when known
    pub drift_bound: Option<S>,
}

impl<S: Real> ControlledTrajectory<S> {
    /// `g(mu_T, X_T) + int f + 1/2 sum_k int |alpha^k|^2`.
    pub fn realized_cost(&self) -> S {
        self.terminal_cost + self.running_cost + self.control_energy
    }

    pub fn path_ref(&self) -> PathRef<'_, S> {
        PathRef::new(&self.path, self.n_particles, self.occupation.dim())
    }

    /// Steps whose unclipped drift exceeds the certified bound.
    pub fn bound_violations(&self) -> usize {
        match self.drift_bound {
            Some(b) => self
                .drift_log
                .iter()
                .filter(|d| !d.clipped && d.max_abs() > b)
                .count(),
            None => 0,
        }
    }
}

/// Simulates trajectory `index` of the optimally controlled system from
/// `(nu, x)` on `[0, horizon]`.
///
/// At step `i` the drift is estimated afresh from `n_inner` inner paths of
/// horizon `T - t_i` started at `X_{t_i}` with base measure `mu_{t_i}`.
/// The outer noise is stream `index` of the seed, the same stream
/// [`crate::occupation::PathEnsemble::brownian`] uses for sample `index`.
pub fn simulate_optimal<S: Real>(
    costs: &CostPair<S>,
    horizon: S,
    nu: &OccupationMeasure<S>,
    x: &[S],
    config: &OptimalConfig<S>,
    index: usize,
) -> Result<ControlledTrajectory<S>, DynamicsError> {
    let n = particles(nu, x)?;
    let grid = TimeGrid::uniform(horizon, config.dt).map_err(crate::feynman_kac::FeynmanKacError::from)?;
    let bound = drift_bound(costs, horizon, nu.dim()).ok();
    let options = DriftOptions {
        clip: if config.clip { bound } else { None },
    };
    let family = Substreams::new(config.seed);
    let inner = family.child(index as u64);
    let mut log = Vec::with_capacity(grid.steps());
    let run = euler_maruyama(
        &grid,
        nu,
        x,
        &mut family.stream(index as u64),
        |i, _t, mu, xi, out| {
            let est = drift_on_grid(costs, &grid.tail(i), mu, xi, config.n_inner, inner.child(i as u64), options)
                .map_err(|source| DynamicsError::Drift { step: i, source })?;
            out.copy_from_slice(&est.drift);
            log.push(est);
            Ok::<(), DynamicsError>(())
        },
    )?;
    let prepared = costs.prepare(nu);
    let cost = prepared.evaluate(
        &PathRef::new(&run.path, n, nu.dim()),
        n,
        grid.dt(),
        false,
        &mut Workspace::new(),
    )?;
    Ok(ControlledTrajectory {
        n_particles: n,
        path: run.path,
        occupation: run.occupation,
        drift_log: log,
        terminal_cost: cost.terminal,
        running_cost: cost.running,
        control_energy: run.energy,
        drift_bound: bound,
    })
}

/// Trajectories `0..n_traj` of [`simulate_optimal`].
pub fn simulate_ensemble<S: Real>(
    costs: &CostPair<S>,
    horizon: S,
    nu: &OccupationMeasure<S>,
    x: &[S],
    config: &OptimalConfig<S>,
    n_traj: usize,
) -> Result<Vec<ControlledTrajectory<S>>, DynamicsError> {
    par_collect(n_traj, |j| simulate_optimal(costs, horizon, nu, x, config, j))
        .into_iter()
        .collect()
}
