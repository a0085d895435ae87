use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::feynman_kac::{
    driftless_samples, particles, tail_grid, CostPair, LogWeights, MCEstimate, Sampling,
};
use crate::functionals::{
    particle_polylines, sausage_volume, PreparedBase, SausageFunctional, SausageScratch, Support,
};
use crate::occupation::{BrownianSampler, OccupationMeasure, PathRef};
use crate::rng::Substreams;
use crate::scalar::{norm, Real};
use crate::stats::{mean_and_se, pairwise_sum, par_collect_with, ratio_and_se};

/// Below this effective sample size Gibbs estimates are flagged unreliable.
pub const MIN_ESS: f64 = 50.0;

/// A scalar functional of one particle path.
#[derive(Clone, Debug, PartialEq)]
pub enum PathStatistic<S> {
    /// `X_T^k . e_axis`
    TerminalCoord { particle: usize, axis: usize },
    /// `|X_T^k|`
    TerminalNorm { particle: usize },
    /// `g_l(nu + theta_T)`
    Sausage(SausageFunctional<S>),
    /// `m(S)` of the particle polylines at the given radius
    SausageVolume { radius: S, grid_h: S },
}

impl<S: Real> PathStatistic<S> {
    pub fn name(&self) -> String {
        match self {
            PathStatistic::TerminalCoord { particle, axis } => format!("x{particle}_T[{axis}]"),
            PathStatistic::TerminalNorm { particle } => format!("|x{particle}_T|"),
            PathStatistic::Sausage(sf) => format!("g_{}", sf.mollifier.level),
            PathStatistic::SausageVolume { radius, .. } => format!("volume_{radius}"),
        }
    }

    /// `{X_T . e_1, X_T . e_2, |X_T|}` of particle 0 and `g_l`.
    pub fn standard(sf: SausageFunctional<S>) -> Vec<Self> {
        vec![
            PathStatistic::TerminalCoord { particle: 0, axis: 0 },
            PathStatistic::TerminalCoord { particle: 0, axis: 1 },
            PathStatistic::TerminalNorm { particle: 0 },
            PathStatistic::Sausage(sf),
        ]
    }
}

/// Statistics with the base measure folded in.
pub struct StatisticSet<'a, S: Real> {
    stats: &'a [PathStatistic<S>],
    bases: Vec<Option<PreparedBase<S>>>,
}

impl<'a, S: Real> StatisticSet<'a, S> {
    pub fn new(stats: &'a [PathStatistic<S>], nu: &OccupationMeasure<S>) -> Self {
        let bases = stats
            .iter()
            .map(|s| match s {
                PathStatistic::Sausage(sf) => Some(sf.prepare(nu)),
                _ => None,
            })
            .collect();
        Self { stats, bases }
    }

    pub fn names(&self) -> Vec<String> {
        self.stats.iter().map(|s| s.name()).collect()
    }

    /// Values of every statistic on `path` (steps of length `dt`).
    pub fn evaluate(
        &self,
        path: &PathRef<'_, S>,
        n: usize,
        dt: S,
        scratch: &mut SausageScratch<S>,
    ) -> Result<Vec<S>, DynamicsError> {
        let end = path.terminal();
        let dim = end.len() / n;
        let steps = path.len() - 1;
        self.stats
            .iter()
            .zip(&self.bases)
            .map(|(s, base)| {
                Ok(match (s, base) {
                    (PathStatistic::TerminalCoord { particle, axis }, _) => end[particle * dim + axis],
                    (PathStatistic::TerminalNorm { particle }, _) => norm(&end[particle * dim..(particle + 1) * dim]),
                    (PathStatistic::Sausage(sf), Some(base)) => {
                        let w = vec![dt; steps * n];
                        sf.extend(base, path.atoms_before(steps), &w, 0, scratch)
                    }
                    (PathStatistic::SausageVolume { radius, grid_h }, _) => {
                        let lines = particle_polylines(path, n);
                        let support = Support::Polylines { dim, lines: &lines };
                        sausage_volume(support, *radius, *grid_h)
                            .map_err(crate::feynman_kac::FeynmanKacError::from)?
                            .value
                    }
                    _ => unreachable!("sausage statistics carry a prepared base"),
                })
            })
            .collect()
    }
}

/// A statistic's estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatEstimate<S> {
    pub name: String,
    pub mean: S,
    pub std_error: S,
}

/// Output of [`sample_gibbs`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsReport<S> {
    pub statistics: Vec<StatEstimate<S>>,
    /// `(sum w)^2 / sum w^2`
    pub ess: S,
    /// normalising constant `Z = E[exp(-int f - g)]`
    pub z: MCEstimate<S>,
    /// `log Z`
    pub log_z: S,
    pub n_samples: usize,
    pub seed: u64,
    pub warning: Option<String>,
}

/// A driftless path with its Gibbs weight.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPathSample<S> {
    pub path: Vec<S>,
    pub log_weight: S,
    pub weight: S,
}

/// Self-normalised importance sampling of the law
/// `exp(-int f - g) dW / Z` on paths from `x` with base `nu`: returns
/// `sum w F / sum w` for every statistic, with delta-method standard errors.
///
/// Sample `i` uses stream `i` of the seed, as [`crate::feynman_kac::estimate_u`].
pub fn sample_gibbs<S: Real>(
    costs: &CostPair<S>,
    horizon: S,
    nu: &OccupationMeasure<S>,
    x: &[S],
    sampling: &Sampling<S>,
    statistics: &[PathStatistic<S>],
) -> Result<GibbsReport<S>, DynamicsError> {
    let n = particles(nu, x)?;
    let grid = tail_grid(horizon, S::zero(), sampling.dt)?;
    let streams = Substreams::new(sampling.seed);
    let samples = driftless_samples(costs, &grid, nu, x, sampling.n_samples, streams, false)?;
    let lw = LogWeights::new(samples.into_iter().map(|s| s.log_weight).collect());
    let w = lw.scaled();

    // the statistics re-draw the same paths from their streams
    let set = StatisticSet::new(statistics, nu);
    let sampler = BrownianSampler::new(x.to_vec(), n, grid.clone());
    let values = par_collect_with(
        sampling.n_samples,
        || (vec![S::zero(); sampler.path_len()], SausageScratch::new()),
        |(buf, scratch), i| {
            sampler.fill(&mut streams.stream(i as u64), buf);
            set.evaluate(&PathRef::new(buf, n, nu.dim()), n, grid.dt(), scratch)
        },
    )
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let mut stats = Vec::with_capacity(statistics.len());
    let mut num = vec![S::zero(); w.len()];
    for (q, name) in set.names().into_iter().enumerate() {
        for ((v, row), &wi) in num.iter_mut().zip(&values).zip(&w) {
            *v = row[q] * wi;
        }
        let (mean, std_error) = ratio_and_se(&num, &w);
        stats.push(StatEstimate { name, mean, std_error });
    }
    let sum_w = pairwise_sum(&w);
    let sq: Vec<S> = w.iter().map(|&v| v * v).collect();
    let ess = sum_w * sum_w / pairwise_sum(&sq);
    let (mz, sz) = mean_and_se(&w);
    let scale = lw.shift.exp();
    let warning = (ess < S::lit(MIN_ESS)).then(|| {
        format!("effective sample size {ess} is below {MIN_ESS}: Gibbs estimates are unreliable")
    });
    Ok(GibbsReport {
        statistics: stats,
        ess,
        z: MCEstimate {
            mean: scale * mz,
            std_error: scale * sz,
            n_samples: sampling.n_samples,
            seed: sampling.seed,
        },
        log_z: lw.shift + mz.ln(),
        n_samples: sampling.n_samples,
        seed: sampling.seed,
        warning,
    })
}

/// The weighted driftless paths behind [`sample_gibbs`], for export.
pub fn weighted_paths<S: Real>(
    costs: &CostPair<S>,
    horizon: S,
    nu: &OccupationMeasure<S>,
    x: &[S],
    sampling: &Sampling<S>,
) -> Result<Vec<WeightedPathSample<S>>, DynamicsError> {
    let n = particles(nu, x)?;
    let grid = tail_grid(horizon, S::zero(), sampling.dt)?;
    let streams = Substreams::new(sampling.seed);
    let samples = driftless_samples(costs, &grid, nu, x, sampling.n_samples, streams, false)?;
    let sampler = BrownianSampler::new(x.to_vec(), n, grid);
    Ok(samples
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut path = vec![S::zero(); sampler.path_len()];
            sampler.fill(&mut streams.stream(i as u64), &mut path);
            WeightedPathSample {
                path,
                log_weight: s.log_weight,
                weight: s.log_weight.exp(),
            }
        })
        .collect())
}
