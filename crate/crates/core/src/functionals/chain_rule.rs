use super::{FlatFunctional, FunctionalError};
use crate::occupation::{OccupationMeasure, TimeGrid};
use crate::scalar::Real;

/// `|u(mu_T) - u(nu) - sum_k int_0^T delta_mu u(mu_s, x_s^k) ds|` for
/// deterministic paths `x`, evaluated on the grid of step `dt`.
///
/// `paths(t)` returns the `n` particle positions at time `t`, flat.
/// The occupation is built from left-endpoint atoms; the time integral on
/// the right uses the trapezoid rule, so the residual is `O(dt)`.
pub fn chain_rule_residual<S, U, P>(
    u: &U,
    base: &OccupationMeasure<S>,
    paths: P,
    horizon: S,
    dt: S,
) -> Result<S, FunctionalError>
where
    S: Real,
    U: FlatFunctional<S> + ?Sized,
    P: Fn(S) -> Vec<S>,
{
    let grid = TimeGrid::uniform(horizon, dt)?;
    let dim = base.dim();
    let mut mu = base.clone();
    let start = u.value(base);
    let drift = |mu: &OccupationMeasure<S>, x: &[S]| {
        x.chunks_exact(dim).fold(S::zero(), |acc, xk| acc + u.delta(mu, xk))
    };
    let mut x = paths(S::zero());
    let mut left = drift(&mu, &x);
    let mut integral = S::zero();
    let h = grid.dt();
    for i in 0..grid.steps() {
        mu.push_segment(&x, h)?;
        x = paths(grid.time(i + 1));
        let right = drift(&mu, &x);
        integral = integral + S::lit(0.5) * h * (left + right);
        left = right;
    }
    Ok((u.value(&mu) - start - integral).abs())
}
