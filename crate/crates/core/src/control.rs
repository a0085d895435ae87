//! The optimal drift `alpha^k = grad_{x^k} u / u = -E[G w] / E[w]` and its
//! a-priori bound.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feynman_kac::{driftless_samples, tail_grid, CostPair, FeynmanKacError, LogWeights, Sampling};
use crate::occupation::{OccupationMeasure, TimeGrid};
use crate::rng::Substreams;
use crate::scalar::Real;
use crate::stats::ratio_and_se;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("value function underflow: log u = {log_u}")]
    Underflow { log_u: f64 },
    #[error("no derivative bound is known for the {0} cost")]
    MissingCertificate(&'static str),
    #[error(transparent)]
    FeynmanKac(#[from] FeynmanKacError),
}

/// Estimated drift of every particle (flat `n * d`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate<S> {
    pub drift: Vec<S>,
    pub std_error: Vec<S>,
    pub n_inner: usize,
    /// some component was cut back to the bound
    pub clipped: bool,
}

impl<S: Real> DriftEstimate<S> {
    pub fn zero(len: usize, n_inner: usize) -> Self {
        Self {
            drift: vec![S::zero(); len],
            std_error: vec![S::zero(); len],
            n_inner,
            clipped: false,
        }
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> S {
        self.drift.iter().fold(S::zero(), |m, &a| m.max(a.abs()))
    }
}

/// Optional clipping of the estimate at the bound of [`drift_bound`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DriftOptions<S> {
    pub clip: Option<S>,
}

/// `alpha^*(t, nu, x)` for the problem on `[0, horizon]`, from `n_samples`
/// inner paths of horizon `horizon - t`.
///
/// Numerator and denominator share the same inner paths.
pub fn estimate_drift<S: Real>(
    costs: &CostPair<S>,
    horizon: S,
    t: S,
    nu: &OccupationMeasure<S>,
    x: &[S],
    sampling: &Sampling<S>,
    options: DriftOptions<S>,
) -> Result<DriftEstimate<S>, ControlError> {
    let grid = tail_grid(horizon, t, sampling.dt)?;
    drift_on_grid(
        costs,
        &grid,
        nu,
        x,
        sampling.n_samples,
        Substreams::new(sampling.seed),
        options,
    )
}

/// [`estimate_drift`] over an explicit inner grid and stream family.
pub fn drift_on_grid<S: Real>(
    costs: &CostPair<S>,
    grid: &TimeGrid<S>,
    nu: &OccupationMeasure<S>,
    x: &[S],
    n_inner: usize,
    streams: Substreams,
    options: DriftOptions<S>,
) -> Result<DriftEstimate<S>, ControlError> {
    let samples = driftless_samples(costs, grid, nu, x, n_inner, streams, true)?;
    let lw = LogWeights::new(samples.iter().map(|s| s.log_weight).collect());
    let w = lw.scaled();
    let mean_w = crate::stats::mean(&w);
    let log_u = lw.shift + mean_w.ln();
    if !(log_u >= (S::lit(10.0) * S::epsilon()).ln()) {
        return Err(ControlError::Underflow { log_u: log_u.as_f64() });
    }
    let mut est = DriftEstimate::zero(x.len(), n_inner);
    let mut num = vec![S::zero(); n_inner];
    for c in 0..x.len() {
        for ((v, s), &wi) in num.iter_mut().zip(&samples).zip(&w) {
            *v = s.gradient[c] * wi;
        }
        let (r, se) = ratio_and_se(&num, &w);
        est.drift[c] = S::zero() - r;
        est.std_error[c] = se;
    }
    if let Some(bound) = options.clip {
        for a in est.drift.iter_mut() {
            if a.abs() > bound {
                *a = bound * a.signum();
                est.clipped = true;
            }
        }
    }
    Ok(est)
}

/// `C_T = sup|grad_x g| + T sup|grad_y delta_mu g| + T sup|grad_x f|
/// + T^2/2 sup|grad_y delta_mu f|`, a bound on `|grad_{x^k} u| / u`.
pub fn drift_bound<S: Real>(costs: &CostPair<S>, horizon: S, dim: usize) -> Result<S, ControlError> {
    let g = costs
        .terminal_bounds(dim)
        .ok_or(ControlError::MissingCertificate("terminal"))?;
    let f = costs
        .running_bounds(dim)
        .ok_or(ControlError::MissingCertificate("running"))?;
    let t = horizon;
    Ok(g.grad_x + t * g.grad_delta + t * f.grad_x + S::lit(0.5) * t * t * f.grad_delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feynman_kac::{Running, Terminal};
    use crate::functionals::{CylindricalFunctional, Plateau, Product, SausageFunctional, MollifierFamily};
    use std::sync::Arc;

    #[test]
    fn zero_cost_has_zero_drift() {
        let nu = OccupationMeasure::empty(2);
        let s = Sampling { n_samples: 50, dt: 0.25, seed: 1 };
        let d = estimate_drift(&CostPair::zero(), 1.0, 0.0, &nu, &[0.3, 0.1], &s, DriftOptions::default()).unwrap();
        assert!(d.drift.iter().chain(&d.std_error).all(|&v| v == 0.0));
        assert_eq!(drift_bound(&CostPair::<f64>::zero(), 1.0, 2).unwrap(), 0.0);
    }

    #[test]
    fn linear_terminal_cost_gives_constant_drift() {
        let nu = OccupationMeasure::empty(2);
        let s = Sampling { n_samples: 50, dt: 0.25, seed: 1 };
        let costs = CostPair::terminal_only(Terminal::Linear(vec![1.0f64, -2.0]));
        let d = estimate_drift(&costs, 1.0, 0.0, &nu, &[0.0, 0.0], &s, DriftOptions::default()).unwrap();
        assert!((d.drift[0] + 1.0).abs() < 1e-12 && (d.drift[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn clipping_is_recorded() {
        let nu = OccupationMeasure::empty(1);
        let s = Sampling { n_samples: 4, dt: 0.5, seed: 1 };
        let costs = CostPair::terminal_only(Terminal::Linear(vec![3.0]));
        let d = estimate_drift(&costs, 1.0, 0.0, &nu, &[0.0], &s, DriftOptions { clip: Some(1.0) }).unwrap();
        assert_eq!(d.drift, vec![-1.0]);
        assert!(d.clipped);
    }

    #[test]
    fn bound_is_linear_in_horizon_for_sausage() {
        let sf = SausageFunctional::new(MollifierFamily::standard(4), 0.1).unwrap();
        let costs = CostPair::terminal_only(Terminal::Sausage(sf));
        let b1: f64 = drift_bound(&costs, 0.5, 2).unwrap();
        let b2 = drift_bound(&costs, 1.0, 2).unwrap();
        assert!((b2 - 2.0 * b1).abs() < 1e-12 * b2);
    }

    #[test]
    fn missing_certificates_are_rejected() {
        let phi: Arc<dyn crate::functionals::TestFunction<f64>> =
            Arc::new(Plateau::new(vec![0.0], 0.0, 1.0, 1.0));
        let cf = CylindricalFunctional::new(vec![phi.clone(), phi], Arc::new(Product));
        let costs = CostPair::terminal_only(Terminal::Cylindrical(cf.clone()));
        assert!(matches!(drift_bound(&costs, 1.0, 1), Err(ControlError::MissingCertificate(_))));
        let costs = CostPair::new(Running::Cylindrical(cf), Terminal::Constant(0.0));
        assert!(matches!(drift_bound(&costs, 1.0, 1), Err(ControlError::MissingCertificate(_))));
        let exact = CostPair::terminal_only(Terminal::ExactSausage { radius: 1.0, grid_h: 0.1 });
        assert!(drift_bound(&exact, 1.0, 2).is_err());
    }
}
