use serde::{Deserialize, Serialize};

use super::{ControlledTrajectory, DynamicsError, GibbsReport, PathStatistic, StatEstimate, StatisticSet};
use crate::functionals::SausageScratch;
use crate::occupation::OccupationMeasure;
use crate::scalar::Real;
use crate::stats::mean_and_se;

/// Two laws are declared equal when every `|z|` stays below this.
pub const Z_THRESHOLD: f64 = 4.0;

/// What a law sample was drawn for. Seeds are deliberately not part of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawConfig<S> {
    pub n_particles: usize,
    pub dim: usize,
    pub horizon: S,
    pub dt: S,
    pub start: Vec<S>,
    pub base_atoms: usize,
    /// description of the costs
    pub costs: String,
}

/// Per-statistic estimates of one construction of the law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawSummary<S> {
    pub config: LawConfig<S>,
    pub statistics: Vec<StatEstimate<S>>,
}

impl<S: Real> LawSummary<S> {
    pub fn from_gibbs(config: LawConfig<S>, report: &GibbsReport<S>) -> Self {
        Self {
            config,
            statistics: report.statistics.clone(),
        }
    }
}

/// Plain Monte Carlo means of the statistics over controlled trajectories.
pub fn summarize_trajectories<S: Real>(
    config: LawConfig<S>,
    trajectories: &[ControlledTrajectory<S>],
    statistics: &[PathStatistic<S>],
    nu: &OccupationMeasure<S>,
) -> Result<LawSummary<S>, DynamicsError> {
    let set = StatisticSet::new(statistics, nu);
    let mut scratch = SausageScratch::new();
    let rows = trajectories
        .iter()
        .map(|tr| set.evaluate(&tr.path_ref(), tr.n_particles, config.dt, &mut scratch))
        .collect::<Result<Vec<_>, _>>()?;
    let stats = set
        .names()
        .into_iter()
        .enumerate()
        .map(|(q, name)| {
            let col: Vec<S> = rows.iter().map(|r| r[q]).collect();
            let (mean, std_error) = mean_and_se(&col);
            StatEstimate { name, mean, std_error }
        })
        .collect();
    Ok(LawSummary {
        config,
        statistics: stats,
    })
}

/// Per-statistic z-scores of two constructions of the same law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawComparison<S> {
    pub z: Vec<(String, S)>,
    pub passed: bool,
}

/// `z = (mean_a - mean_b) / sqrt(se_a^2 + se_b^2)` for every statistic;
/// passes when all `|z| < 4`.
pub fn law_equality_test<S: Real>(a: &LawSummary<S>, b: &LawSummary<S>) -> Result<LawComparison<S>, DynamicsError> {
    if a.config != b.config {
        return Err(DynamicsError::Mismatch(format!("{:?} vs {:?}", a.config, b.config)));
    }
    let names_a: Vec<&str> = a.statistics.iter().map(|s| s.name.as_str()).collect();
    let names_b: Vec<&str> = b.statistics.iter().map(|s| s.name.as_str()).collect();
    if names_a != names_b {
        return Err(DynamicsError::Mismatch(format!("statistics {names_a:?} vs {names_b:?}")));
    }
    let z: Vec<(String, S)> = a
        .statistics
        .iter()
        .zip(&b.statistics)
        .map(|(x, y)| {
            let se = (x.std_error * x.std_error + y.std_error * y.std_error).sqrt();
            let diff = x.mean - y.mean;
            let z = if se > S::zero() {
                diff / se
            } else if diff == S::zero() {
                S::zero()
            } else {
                S::infinity() * diff.signum()
            };
            (x.name.clone(), z)
        })
        .collect();
    let passed = z.iter().all(|(_, v)| v.abs() < S::lit(Z_THRESHOLD));
    Ok(LawComparison { z, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(costs: &str, mean: f64) -> LawSummary<f64> {
        LawSummary {
            config: LawConfig {
                n_particles: 1,
                dim: 2,
                horizon: 1.0,
                dt: 0.25,
                start: vec![0.0, 0.0],
                base_atoms: 0,
                costs: costs.into(),
            },
            statistics: vec![StatEstimate {
                name: "a".into(),
                mean,
                std_error: 0.1,
            }],
        }
    }

    #[test]
    fn z_scores_and_mismatch() {
        let cmp = law_equality_test(&summary("g", 1.0), &summary("g", 1.2)).unwrap();
        assert!((cmp.z[0].1 + 0.2 / 0.02f64.sqrt()).abs() < 1e-12);
        assert!(cmp.passed);
        assert!(!law_equality_test(&summary("g", 0.0), &summary("g", 1.0)).unwrap().passed);
        assert!(matches!(
            law_equality_test(&summary("g", 1.0), &summary("h", 1.0)),
            Err(DynamicsError::Mismatch(_))
        ));
    }
}
