use super::{particles, tail_grid, CostPair, FeynmanKacError, MCEstimate, Sampling, Workspace};
use crate::occupation::{OccupationMeasure, PathRef, TimeGrid};
use crate::rng::{NormalStream, Substreams};
use crate::scalar::Real;
use crate::stats::{mean_and_se, par_collect_with};

/// A feedback control `(t, mu, x) -> alpha` for all particles at once.
pub trait Policy<S: Real>: Sync {
    /// Writes the drift (flat `n * d`) into `out`.
    fn drift(&self, t: S, mu: &OccupationMeasure<S>, x: &[S], out: &mut [S]);
}

/// The same drift in every state.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantPolicy<S>(pub Vec<S>);

impl<S: Real> Policy<S> for ConstantPolicy<S> {
    fn drift(&self, _t: S, _mu: &OccupationMeasure<S>, _x: &[S], out: &mut [S]) {
        out.copy_from_slice(&self.0);
    }
}

impl<S: Real, F> Policy<S> for F
where
    F: Fn(S, &OccupationMeasure<S>, &[S], &mut [S]) + Sync,
{
    fn drift(&self, t: S, mu: &OccupationMeasure<S>, x: &[S], out: &mut [S]) {
        self(t, mu, x, out)
    }
}

/// One Euler-Maruyama trajectory of the controlled system.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlledPath<S: Real> {
    /// `(M+1) x n x d`, step-major
    pub path: Vec<S>,
    /// `nu + sum_i dt sum_k delta_{X_i^k}`
    pub occupation: OccupationMeasure<S>,
    /// `1/2 sum_i dt |alpha_i|^2`
    pub energy: S,
}

/// Runs `X_{i+1} = X_i + alpha_i dt + sqrt(dt) xi_i` with the occupation
/// updated by left-endpoint atoms. Normals are drawn in the same order as
/// [`crate::occupation::BrownianSampler`], so a zero drift reproduces the
/// driftless path bit for bit.
///
/// `drift(i, t_i, mu_i, X_i, out)` supplies the control at step `i`.
pub fn euler_maruyama<S, E, D>(
    grid: &TimeGrid<S>,
    nu: &OccupationMeasure<S>,
    x: &[S],
    stream: &mut NormalStream,
    mut drift: D,
) -> Result<ControlledPath<S>, E>
where
    S: Real,
    D: FnMut(usize, S, &OccupationMeasure<S>, &[S], &mut [S]) -> Result<(), E>,
{
    let w = x.len();
    let dt = grid.dt();
    let sq = dt.sqrt();
    let half = S::lit(0.5);
    let mut path = Vec::with_capacity((grid.steps() + 1) * w);
    path.extend_from_slice(x);
    let mut mu = nu.clone();
    let mut alpha = vec![S::zero(); w];
    let mut energy = S::zero();
    for i in 0..grid.steps() {
        let t = grid.time(i);
        let cur = i * w;
        drift(i, t, &mu, &path[cur..cur + w], &mut alpha)?;
        let a2 = alpha.iter().fold(S::zero(), |s, &a| s + a * a);
        energy = energy + half * dt * a2;
        mu.push_segment(&path[cur..cur + w], dt)
            .expect("positions match the measure dimension");
        for (c, &a) in alpha.iter().enumerate() {
            let z: S = stream.normal();
            let next = path[cur + c] + a * dt + sq * z;
            path.push(next);
        }
    }
    Ok(ControlledPath {
        path,
        occupation: mu,
        energy,
    })
}

/// `E[g(mu_T, X_T) + int f + 1/2 sum_k int |alpha^k|^2]` under `policy`,
/// the right-hand side of the Boue-Dupuis formula for that control.
pub fn control_cost<S: Real, P: Policy<S> + ?Sized>(
    policy: &P,
    costs: &CostPair<S>,
    horizon: S,
    nu: &OccupationMeasure<S>,
    x: &[S],
    sampling: &Sampling<S>,
) -> Result<MCEstimate<S>, FeynmanKacError> {
    if sampling.n_samples == 0 {
        return Err(FeynmanKacError::NoSamples);
    }
    let n = particles(nu, x)?;
    let grid = tail_grid(horizon, S::zero(), sampling.dt)?;
    let dt = grid.dt();
    let prepared = costs.prepare(nu);
    let streams = Substreams::new(sampling.seed);
    let per_sample = par_collect_with(sampling.n_samples, Workspace::new, |ws, j| {
        let run = euler_maruyama(&grid, nu, x, &mut streams.stream(j as u64), |i, t, mu, xi, out| {
            policy.drift(t, mu, xi, out);
            if out.iter().all(|a| a.is_finite()) {
                Ok(())
            } else {
                Err(FeynmanKacError::NonFiniteDrift {
                    sample: j,
                    step: i,
                    t: t.as_f64(),
                    state: xi.iter().map(|v| v.as_f64()).collect(),
                })
            }
        })?;
        let path = PathRef::new(&run.path, n, nu.dim());
        let cost = prepared.evaluate(&path, n, dt, false, ws)?;
        Ok(cost.running + cost.terminal + run.energy)
    });
    let values = per_sample.into_iter().collect::<Result<Vec<S>, FeynmanKacError>>()?;
    let (mean, std_error) = mean_and_se(&values);
    Ok(MCEstimate {
        mean,
        std_error,
        n_samples: sampling.n_samples,
        seed: sampling.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occupation::PathEnsemble;

    #[test]
    fn zero_drift_reproduces_driftless_paths() {
        let grid = TimeGrid::uniform(1.0f64, 0.0625).unwrap();
        let x = vec![0.5, -0.25, 0.0, 1.0];
        let nu = OccupationMeasure::empty(2);
        let ens = PathEnsemble::brownian(x.clone(), 2, grid.clone(), 3, 11);
        let streams = Substreams::new(11);
        for j in 0..3 {
            let run = euler_maruyama(&grid, &nu, &x, &mut streams.stream(j), |_, _, _, _, out| {
                out.iter_mut().for_each(|a| *a = 0.0);
                Ok::<(), ()>(())
            })
            .unwrap();
            assert_eq!(run.path, ens.samples[j as usize]);
            assert_eq!(run.energy, 0.0);
            assert_eq!(run.occupation.total_mass(), 2.0);
        }
    }

    #[test]
    fn non_finite_drift_is_reported_with_state() {
        let nu = OccupationMeasure::empty(1);
        let s = Sampling { n_samples: 2, dt: 0.5, seed: 0 };
        let bad = |t: f64, _: &OccupationMeasure<f64>, _: &[f64], out: &mut [f64]| {
            out[0] = if t > 0.0 { f64::NAN } else { 0.0 };
        };
        let err = control_cost(&bad, &CostPair::zero(), 1.0, &nu, &[0.0], &s).unwrap_err();
        assert!(matches!(err, FeynmanKacError::NonFiniteDrift { sample: 0, step: 1, .. }));
    }
}
