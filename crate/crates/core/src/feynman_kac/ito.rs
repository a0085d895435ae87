use super::{particles, tail_grid, FeynmanKacError, MCEstimate, Sampling};
use crate::functionals::CylindricalFunctional;
use crate::occupation::{BrownianSampler, OccupationMeasure, PathRef};
use crate::rng::Substreams;
use crate::scalar::Real;
use crate::stats::{mean_and_se, par_collect_with};

/// Smooth factor `Q(t, x)` of a test functional `u = Psi(mu) Q(t, x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpaceTime<S> {
    One,
    /// `|x|^2` over all particles
    SquaredNorm,
    /// `a + b t`
    TimeLinear { a: S, b: S },
}

impl<S: Real> SpaceTime<S> {
    fn value(&self, t: S, x: &[S]) -> S {
        match *self {
            SpaceTime::One => S::one(),
            SpaceTime::SquaredNorm => x.iter().fold(S::zero(), |s, &v| s + v * v),
            SpaceTime::TimeLinear { a, b } => a + b * t,
        }
    }

    /// `d_t Q + 1/2 Lap_x Q`.
    fn generator(&self, x: &[S]) -> S {
        match *self {
            SpaceTime::One => S::zero(),
            SpaceTime::SquaredNorm => S::from_usize_lossy(x.len()),
            SpaceTime::TimeLinear { b, .. } => b,
        }
    }
}

/// `u(t, mu, x) = Psi(mu) Q(t, x)` with `Psi` cylindrical.
#[derive(Clone, Debug)]
pub struct ItoFunctional<S: Real> {
    pub psi: CylindricalFunctional<S>,
    pub q: SpaceTime<S>,
}

/// Estimates `E[u(T, mu_T, X_T)] - u(0, nu, x) - E[int_0^T (d_t u + 1/2 Lap_x u
/// + D_mu u) ds]` for driftless particles, `D_mu u = sum_k delta_mu u(x^k)`.
///
/// The time integral uses the trapezoid rule on the simulation grid while
/// the occupation uses left-endpoint atoms, so the residual is `O(dt)` plus
/// Monte Carlo noise. Returns the absolute mean difference and the standard
/// error of the per-path differences.
pub fn ito_residual<S: Real>(
    u: &ItoFunctional<S>,
    horizon: S,
    nu: &OccupationMeasure<S>,
    x: &[S],
    sampling: &Sampling<S>,
) -> Result<MCEstimate<S>, FeynmanKacError> {
    if sampling.n_samples == 0 {
        return Err(FeynmanKacError::NoSamples);
    }
    let n = particles(nu, x)?;
    let dim = nu.dim();
    let grid = tail_grid(horizon, S::zero(), sampling.dt)?;
    let dt = grid.dt();
    let sampler = BrownianSampler::new(x.to_vec(), n, grid.clone());
    let streams = Substreams::new(sampling.seed);
    let psi = &u.psi;
    let base = psi.pairings(nu);
    let m = base.len();
    let half = S::lit(0.5);
    let diffs = par_collect_with(
        sampling.n_samples,
        || (vec![S::zero(); sampler.path_len()], vec![S::zero(); m]),
        |(buf, coeffs), j| {
            sampler.fill(&mut streams.stream(j as u64), buf);
            let path = PathRef::new(buf, n, dim);
            let mut pairs = base.clone();
            // integrand at grid point i, given the pairings of mu_{t_i}
            let integrand = |i: usize, pairs: &[S], coeffs: &mut Vec<S>| {
                let xi = path.at(i);
                let t = grid.time(i);
                psi.outer.gradient(pairs, coeffs);
                let d_mu = xi.chunks_exact(dim).fold(S::zero(), |acc, y| {
                    acc + coeffs
                        .iter()
                        .zip(&psi.tests)
                        .fold(S::zero(), |s, (&c, phi)| s + c * phi.value(y))
                });
                psi.outer.value(pairs) * u.q.generator(xi) + u.q.value(t, xi) * d_mu
            };
            let start = psi.outer.value(&pairs) * u.q.value(S::zero(), x);
            let mut left = integrand(0, &pairs, coeffs);
            let mut rhs = S::zero();
            for i in 0..grid.steps() {
                for (a, phi) in pairs.iter_mut().zip(&psi.tests) {
                    let s = path.at(i).chunks_exact(dim).fold(S::zero(), |s, y| s + phi.value(y));
                    *a = *a + dt * s;
                }
                let right = integrand(i + 1, &pairs, coeffs);
                rhs = rhs + half * dt * (left + right);
                left = right;
            }
            let end = psi.outer.value(&pairs) * u.q.value(grid.horizon(), path.terminal());
            end - start - rhs
        },
    );
    let (mean, std_error) = mean_and_se(&diffs);
    Ok(MCEstimate {
        mean: mean.abs(),
        std_error,
        n_samples: sampling.n_samples,
        seed: sampling.seed,
    })
}
