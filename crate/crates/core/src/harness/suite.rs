use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::control::{drift_bound, estimate_drift, DriftOptions};
use crate::dynamics::{
    law_equality_test, sample_gibbs, simulate_ensemble, summarize_trajectories, LawConfig, LawSummary,
    OptimalConfig, PathStatistic,
};
use crate::feynman_kac::{
    control_cost, estimate_c, estimate_u, ito_residual, sample_log_weights, ConstantPolicy, CostPair,
    ItoFunctional, Running, Sampling, SpaceTime, Terminal,
};
use crate::functionals::{
    chain_rule_residual, sausage_volume, Affine, CylindricalFunctional, MollifierFamily, Plateau, Product,
    SausageFunctional, Square, Support, TestFunction,
};
use crate::occupation::OccupationMeasure;
use crate::rng::Substreams;
use crate::stats::mean_and_se;

type Error = Box<dyn std::error::Error + Send + Sync>;

/// Scale of an acceptance run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    /// sample sizes / 10, tolerances widened to 5 SE
    Quick,
    Full,
}

impl Tier {
    fn n(self, full: usize) -> usize {
        match self {
            Tier::Quick => (full / 10).max(1),
            Tier::Full => full,
        }
    }

    /// Standard errors allowed in Monte Carlo comparisons.
    pub fn k(self) -> f64 {
        match self {
            Tier::Quick => 5.0,
            Tier::Full => 3.0,
        }
    }
}

/// Result of one criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// z-scores (or error-to-tolerance ratios) behind the verdict
    pub z: Vec<(String, f64)>,
    /// seconds
    pub runtime: f64,
    /// numerical results; identical configs reproduce it bitwise
    pub payload: Value,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {} {}: {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.runtime
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub tier: Tier,
    pub outcomes: Vec<CriterionOutcome>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

struct Check {
    passed: bool,
    detail: String,
    z: Vec<(String, f64)>,
    payload: Value,
}

pub const CRITERIA: [(u8, &str); 9] = [
    (1, "trivial Feynman-Kac"),
    (2, "Boue-Dupuis sandwich"),
    (3, "derivative ladder"),
    (4, "sausage volumes"),
    (5, "g_l convergence"),
    (6, "chain rule and Ito residuals"),
    (7, "drift against finite differences"),
    (8, "law of optimal trajectories"),
    (9, "thread-count reproducibility"),
];

/// Runs every criterion in order.
pub fn acceptance_suite(tier: Tier) -> SuiteReport {
    acceptance_suite_with(tier, |_| {})
}

/// [`acceptance_suite`], reporting each outcome as soon as it is known.
pub fn acceptance_suite_with(tier: Tier, mut report: impl FnMut(&CriterionOutcome)) -> SuiteReport {
    let outcomes = CRITERIA
        .iter()
        .map(|&(id, _)| {
            let o = run_criterion(id, tier);
            report(&o);
            o
        })
        .collect();
    SuiteReport { tier, outcomes }
}

/// Runs a single criterion; errors become failed outcomes.
pub fn run_criterion(id: u8, tier: Tier) -> CriterionOutcome {
    let name = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .map(|c| c.1)
        .unwrap_or("unknown criterion");
    let start = Instant::now();
    let result = match id {
        1 => trivial_feynman_kac(),
        2 => boue_dupuis(tier),
        3 => ladder(1.0),
        4 => volumes(),
        5 => g_ell_convergence(),
        6 => residuals(tier),
        7 => drift_oracle(tier),
        8 => law_equality(tier),
        9 => reproducibility(),
        _ => Err(format!("no criterion {id}").into()),
    };
    let runtime = start.elapsed().as_secs_f64();
    let (passed, detail, z, payload) = match result {
        Ok(c) => (c.passed, c.detail, c.z, c.payload),
        Err(e) => (false, format!("error: {e}"), Vec::new(), Value::Null),
    };
    CriterionOutcome {
        id,
        name: name.to_string(),
        passed,
        detail,
        z,
        runtime,
        payload,
    }
}

/// The derivative ladder with the analytic derivatives multiplied by
/// `sign`; `-1` emulates a mollifier with the wrong sign.
pub fn derivative_ladder(sign: f64) -> CriterionOutcome {
    let start = Instant::now();
    let c = ladder(sign).expect("ladder fixtures are valid");
    CriterionOutcome {
        id: 3,
        name: CRITERIA[2].1.to_string(),
        passed: c.passed,
        detail: c.detail,
        z: c.z,
        runtime: start.elapsed().as_secs_f64(),
        payload: c.payload,
    }
}

fn zscore(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn trivial_feynman_kac() -> Result<Check, Error> {
    let costs = CostPair::new(Running::Constant(1.0), Terminal::Constant(0.0));
    let nu = OccupationMeasure::empty(2);
    let sampling = Sampling {
        n_samples: 1000,
        dt: 1.0 / 64.0,
        seed: 1,
    };
    let u = estimate_u(&costs, 1.0, 0.0, &nu, &[0.0, 0.0], &sampling)?;
    let err = (u.mean - (-1.0f64).exp()).abs();
    Ok(Check {
        passed: err <= 1e-12 && u.std_error == 0.0,
        detail: format!("u = {:.15}, |u - 1/e| = {err:.1e}, se = {}", u.mean, u.std_error),
        z: vec![("err/1e-12".into(), err / 1e-12)],
        payload: serde_json::to_value(u)?,
    })
}

fn boue_dupuis(tier: Tier) -> Result<Check, Error> {
    let k = tier.k();
    let lambda = vec![1.0, 0.0];
    let costs = CostPair::terminal_only(Terminal::Linear(lambda.clone()));
    let nu = OccupationMeasure::empty(2);
    let x = [0.0, 0.0];
    let sampling = Sampling {
        n_samples: tier.n(100_000),
        dt: 1.0 / 32.0,
        seed: 11,
    };
    let c = estimate_c(&costs, 1.0, 0.0, &nu, &x, &sampling)?;
    let optimal = control_cost(
        &ConstantPolicy(lambda.iter().map(|v| -v).collect()),
        &costs,
        1.0,
        &nu,
        &x,
        &Sampling { seed: 12, ..sampling },
    )?;
    let idle = control_cost(&ConstantPolicy(vec![0.0, 0.0]), &costs, 1.0, &nu, &x, &Sampling { seed: 13, ..sampling })?;
    let z_c = zscore(c.mean + 0.5, c.std_error);
    let z_opt = zscore(optimal.mean + 0.5, optimal.std_error);
    let z_idle = zscore(idle.mean, idle.std_error);
    let gap = zscore(idle.mean - c.mean, (idle.std_error.powi(2) + c.std_error.powi(2)).sqrt());
    let passed = z_c.abs() <= k && z_opt.abs() <= k && z_idle.abs() <= k && gap > k;
    Ok(Check {
        passed,
        detail: format!(
            "c = {:.4} ± {:.4}, optimal = {:.4} ± {:.4}, idle = {:.4} ± {:.4}, gap z = {gap:.1}",
            c.mean, c.std_error, optimal.mean, optimal.std_error, idle.mean, idle.std_error
        ),
        z: vec![
            ("c".into(), z_c),
            ("optimal".into(), z_opt),
            ("idle".into(), z_idle),
            ("gap".into(), gap),
        ],
        payload: json!({"c": c, "optimal": optimal, "idle": idle}),
    })
}

const LADDER_STEPS: [f64; 3] = [1e-3, 5e-4, 2.5e-4];

/// Least-squares slope of `log err` against `log eps`.
fn loglog_slope(eps: &[f64], err: &[f64]) -> f64 {
    let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

fn ladder(sign: f64) -> Result<Check, Error> {
    let sf = SausageFunctional::new(MollifierFamily::standard(4), 0.05)?;
    let bounds = sf.bounds(2);
    let streams = Substreams::new(2718);
    let mut slopes = Vec::new();
    let mut within_bounds = true;
    let mut fixtures = Vec::new();
    for f in 0..5u64 {
        let mut s = streams.stream(f);
        let mut unit = || 2.0 * s.uniform::<f64>() - 1.0;
        let mut nu = OccupationMeasure::empty(2);
        for _ in 0..3 {
            let p = [unit(), unit()];
            let w = 0.275 + 0.225 * unit();
            nu.push_atom(&p, w)?;
        }
        let y = [0.8 * unit(), 0.8 * unit()];
        let y2 = [y[0] + 0.5 * unit(), y[1] + 0.5 * unit()];

        let d1 = sign * sf.delta_mu_g(&nu, &y);
        let grad: Vec<f64> = sf.grad_delta_mu_g(&nu, &y).iter().map(|v| sign * v).collect();
        let d2 = sign * sf.delta2_mu_g(&nu, &y, &y2);
        within_bounds &= d1.abs() <= bounds.delta
            && grad.iter().map(|v| v * v).sum::<f64>().sqrt() <= bounds.grad_delta
            && d2.abs() <= bounds.delta2;

        let g0 = sf.g_ell(&nu);
        let base_delta = sf.delta_mu_g(&nu, &y);
        let mut errs = [Vec::new(), Vec::new(), Vec::new()];
        for &eps in &LADDER_STEPS {
            let fd1 = (sf.g_ell(&nu.perturb(&y, eps)?) - g0) / eps;
            errs[0].push((fd1 - d1).abs());
            let fdg: Vec<f64> = (0..2)
                .map(|a| {
                    let mut ya = y;
                    ya[a] += eps;
                    (sf.delta_mu_g(&nu, &ya) - base_delta) / eps
                })
                .collect();
            errs[1].push(fdg.iter().zip(&grad).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
            let fd2 = (sf.delta_mu_g(&nu.perturb(&y2, eps)?, &y) - base_delta) / eps;
            errs[2].push((fd2 - d2).abs());
        }
        let s: Vec<f64> = errs.iter().map(|e| loglog_slope(&LADDER_STEPS, e)).collect();
        fixtures.push(json!({"delta": d1, "grad_delta": grad, "delta2": d2, "errors": errs, "slopes": s}));
        slopes.push(s);
    }
    let all: Vec<f64> = slopes.iter().flatten().copied().collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let passed = within_bounds && all.iter().all(|s| (0.8..=1.2).contains(s));
    Ok(Check {
        passed,
        detail: format!("15 slopes in [{lo:.3}, {hi:.3}], bounds respected: {within_bounds}"),
        z: ["delta", "grad_delta", "delta2"]
            .iter()
            .enumerate()
            .flat_map(|(q, name)| slopes.iter().enumerate().map(move |(f, s)| (format!("{name}[{f}] slope"), s[q])))
            .collect(),
        payload: json!({"fixtures": fixtures, "bounds": bounds}),
    })
}

fn volumes() -> Result<Check, Error> {
    let origin2 = OccupationMeasure::dirac(&[0.0, 0.0], 1.0)?;
    let origin3 = OccupationMeasure::dirac(&[0.0, 0.0, 0.0], 1.0)?;
    let stadium = [vec![-1.0, 0.0, 1.0, 0.0]];
    let cases = [
        ("disc", sausage_volume(Support::Atoms(&origin2), 1.0, 0.005)?, PI, 0.01),
        (
            "stadium",
            sausage_volume(Support::Polylines { dim: 2, lines: &stadium }, 1.0, 0.005)?,
            PI + 4.0,
            0.02,
        ),
        ("ball", sausage_volume(Support::Atoms(&origin3), 1.0, 0.02)?, 4.0 * PI / 3.0, 0.05),
    ];
    let z: Vec<(String, f64)> = cases
        .iter()
        .map(|(n, v, exact, tol)| (format!("{n} err/tol"), (v.value - exact).abs() / tol))
        .collect();
    Ok(Check {
        passed: z.iter().all(|(_, r)| *r < 1.0),
        detail: cases
            .iter()
            .map(|(n, v, exact, _)| format!("{n} {:.4} (exact {exact:.4})", v.value))
            .collect::<Vec<_>>()
            .join(", "),
        z,
        payload: json!(cases.iter().map(|c| c.1).collect::<Vec<_>>()),
    })
}

fn g_ell_convergence() -> Result<Check, Error> {
    let nu = OccupationMeasure::dirac(&[0.0, 0.0], 1.0)?;
    let values: Vec<(u32, f64)> = [2u32, 4, 8, 16]
        .iter()
        .map(|&l| Ok((l, SausageFunctional::new(MollifierFamily::standard(l), 0.02)?.g_ell(&nu))))
        .collect::<Result<_, Error>>()?;
    let gaps: Vec<f64> = values.iter().map(|(_, g)| (g + PI).abs()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let last = gaps[gaps.len() - 1];
    Ok(Check {
        passed: monotone && last < 0.15,
        detail: format!(
            "{}; |g_l + pi| shrinks monotonically: {monotone}, final gap {last:.4}",
            values.iter().map(|(l, g)| format!("g_{l} = {g:.4}")).collect::<Vec<_>>().join(", ")
        ),
        z: values.iter().zip(&gaps).map(|((l, _), d)| (format!("|g_{l} + pi|"), *d)).collect(),
        payload: json!(values),
    })
}

fn plateau(center: [f64; 2], inner: f64, outer: f64) -> Arc<dyn TestFunction<f64>> {
    Arc::new(Plateau::new(center.to_vec(), inner, outer, 1.0))
}

fn residuals(tier: Tier) -> Result<Check, Error> {
    let mut z = Vec::new();
    let mut payload = Vec::new();
    let mut passed = true;

    // deterministic chain rule
    let linear = CylindricalFunctional::linear(plateau([0.5, 0.0], 0.2, 1.5));
    let product = CylindricalFunctional::new(
        vec![plateau([0.5, 0.0], 0.2, 1.5), plateau([-0.3, 0.4], 0.0, 1.2)],
        Arc::new(Product),
    );
    let square = CylindricalFunctional::new(vec![plateau([0.0, 0.3], 0.1, 1.0)], Arc::new(Square { scale: 1.0 }));
    let circle = |t: f64| {
        let a = 1.5 * PI * t;
        vec![0.8 * a.cos(), 0.8 * a.sin()]
    };
    let pair = |t: f64| vec![t, 0.5 * t * t, -0.4 + 0.3 * (3.0 * t).sin(), 0.6 * t];
    let nu2 = OccupationMeasure::dirac(&[0.2, -0.1], 0.5)?;
    let chain = [
        ("chain linear", &linear, 1usize),
        ("chain product", &product, 2),
        ("chain square", &square, 1),
    ];
    for (name, u, n) in chain {
        let r = |dt: f64| {
            if n == 1 {
                chain_rule_residual(u, &nu2, circle, 1.0, dt)
            } else {
                chain_rule_residual(u, &nu2, pair, 1.0, dt)
            }
        };
        let (a, b) = (r(0.01)?, r(0.005)?);
        let ratio = a / b;
        passed &= ratio >= 1.6;
        z.push((format!("{name} ratio"), ratio));
        payload.push(json!({"name": name, "residual": [a, b]}));
    }

    // stochastic residuals of cylindrical functionals
    let nu = OccupationMeasure::empty(2);
    let x = [0.0, 0.0];
    let ito = [
        (
            "ito linear",
            ItoFunctional {
                psi: CylindricalFunctional::linear(plateau([0.0, 0.0], 0.2, 2.0)),
                q: SpaceTime::One,
            },
        ),
        (
            "ito square",
            ItoFunctional {
                psi: CylindricalFunctional::new(vec![plateau([0.3, 0.0], 0.2, 2.0)], Arc::new(Square { scale: 1.0 })),
                q: SpaceTime::TimeLinear { a: 1.0, b: 0.5 },
            },
        ),
    ];
    let n = tier.n(10_000);
    for (name, u) in &ito {
        let run = |dt: f64| ito_residual(u, 1.0, &nu, &x, &Sampling { n_samples: n, dt, seed: 21 });
        let (a, b) = (run(1.0 / 16.0)?, run(1.0 / 32.0)?);
        let ratio = a.mean / b.mean;
        passed &= ratio >= 1.6;
        z.push((format!("{name} ratio"), ratio));
        payload.push(json!({"name": name, "residual": [a, b]}));
    }

    // u = <mu, phi> |x|^2 has no discretisation-free bias only in expectation
    let sq = ItoFunctional {
        psi: CylindricalFunctional::new(
            vec![plateau([0.0, 0.0], 0.2, 2.0)],
            Arc::new(Affine {
                coeffs: vec![0.5],
                offset: 1.0,
            }),
        ),
        q: SpaceTime::SquaredNorm,
    };
    let r = ito_residual(
        &sq,
        1.0,
        &nu,
        &x,
        &Sampling {
            n_samples: n,
            dt: 1.0 / 64.0,
            seed: 22,
        },
    )?;
    let zr = zscore(r.mean, r.std_error);
    passed &= zr <= tier.k();
    z.push(("|x|^2 residual z".into(), zr));
    payload.push(json!({"name": "ito squared norm", "residual": r}));

    Ok(Check {
        passed,
        detail: z
            .iter()
            .map(|(n, v)| format!("{n} {v:.2}"))
            .collect::<Vec<_>>()
            .join(", "),
        z,
        payload: Value::Array(payload),
    })
}

/// Quadrature step of the sausage cost in the drift and law criteria.
pub const DYNAMICS_QUAD_STEP: f64 = 0.25;
const DYN_T: f64 = 0.25;
const DYN_DT: f64 = 1.0 / 128.0;

fn dynamics_costs() -> Result<(SausageFunctional<f64>, CostPair<f64>), Error> {
    let sf = SausageFunctional::new(MollifierFamily::standard(4), DYNAMICS_QUAD_STEP)?;
    Ok((sf, CostPair::terminal_only(Terminal::Sausage(sf))))
}

/// Occupation of the deterministic curve `s -> (0.6 s / T - 0.2, 0.3 sin(8 s))`
/// on `[0, t]` plus an off-axis lump.
fn accumulated(t: f64) -> Result<OccupationMeasure<f64>, Error> {
    let mut nu = OccupationMeasure::dirac(&[0.3, 0.1], 0.05)?;
    nu.push_atom(&[-0.2, 0.4], 0.03)?;
    let steps = (t / DYN_DT).round() as usize;
    for i in 0..steps {
        let s = i as f64 * DYN_DT;
        nu.push_atom(&[0.6 * s / DYN_T - 0.2, 0.3 * (8.0 * s).sin()], DYN_DT)?;
    }
    Ok(nu)
}

struct DriftCase {
    t: f64,
    nu: OccupationMeasure<f64>,
    x: [f64; 2],
}

fn drift_battery() -> Result<Vec<DriftCase>, Error> {
    Ok(vec![
        DriftCase {
            t: 0.0,
            nu: OccupationMeasure::empty(2),
            x: [0.5, 0.0],
        },
        DriftCase {
            t: 0.0,
            nu: accumulated(0.0)?,
            x: [0.5, 0.0],
        },
        DriftCase {
            t: 0.0625,
            nu: accumulated(0.0625)?,
            x: [-0.05, 0.4],
        },
        DriftCase {
            t: 0.125,
            nu: accumulated(0.125)?,
            x: [0.1, 0.27],
        },
        DriftCase {
            t: 0.1875,
            nu: accumulated(0.1875)?,
            x: [-0.4, 0.2],
        },
    ])
}

/// Central difference of `c` in every coordinate of `x`, with common random
/// numbers, and the delta-method standard error of the paired estimator.
fn drift_by_differences(
    costs: &CostPair<f64>,
    case: &DriftCase,
    sampling: &Sampling<f64>,
    step: f64,
) -> Result<(Vec<f64>, Vec<f64>), Error> {
    let mut est = Vec::new();
    let mut se = Vec::new();
    for a in 0..2 {
        let mut plus = case.x;
        let mut minus = case.x;
        plus[a] += step;
        minus[a] -= step;
        let wp = sample_log_weights(costs, DYN_T, case.t, &case.nu, &plus, sampling)?;
        let wm = sample_log_weights(costs, DYN_T, case.t, &case.nu, &minus, sampling)?;
        let (sp, sm) = (wp.scaled(), wm.scaled());
        let (mp, _) = mean_and_se(&sp);
        let (mm, _) = mean_and_se(&sm);
        // alpha = grad log u
        let d = (wp.shift + mp.ln() - wm.shift - mm.ln()) / (2.0 * step);
        let psi: Vec<f64> = sp.iter().zip(&sm).map(|(p, m)| (p / mp - m / mm) / (2.0 * step)).collect();
        est.push(d);
        se.push(mean_and_se(&psi).1);
    }
    Ok((est, se))
}

fn drift_oracle(tier: Tier) -> Result<Check, Error> {
    let k = tier.k();
    let (_, costs) = dynamics_costs()?;
    let n_inner = tier.n(20_000);
    let sampling = Sampling {
        n_samples: n_inner,
        dt: DYN_DT,
        seed: 31,
    };
    let mut z = Vec::new();
    let mut payload = Vec::new();
    let mut passed = true;
    for (i, case) in drift_battery()?.iter().enumerate() {
        let drift = estimate_drift(&costs, DYN_T, case.t, &case.nu, &case.x, &sampling, DriftOptions::default())?;
        let (fd, fd_se) = drift_by_differences(&costs, case, &sampling, 0.05)?;
        for a in 0..2 {
            let se = (drift.std_error[a].powi(2) + fd_se[a].powi(2)).sqrt();
            let za = zscore(drift.drift[a] - fd[a], se);
            passed &= za.abs() <= k;
            z.push((format!("state {i} axis {a}"), za));
        }
        payload.push(json!({"drift": drift, "difference": fd, "difference_se": fd_se}));
    }

    let origin = DriftCase {
        t: 0.0,
        nu: OccupationMeasure::empty(2),
        x: [0.0, 0.0],
    };
    let d0 = estimate_drift(&costs, DYN_T, 0.0, &origin.nu, &origin.x, &sampling, DriftOptions::default())?;
    for a in 0..2 {
        let za = zscore(d0.drift[a], d0.std_error[a]);
        passed &= za.abs() <= k;
        z.push((format!("origin axis {a}"), za));
    }
    payload.push(json!({"origin": d0}));

    // random probes against the a-priori bound
    let bound = drift_bound(&costs, DYN_T, 2)?;
    let probes = 100;
    let stream = Substreams::new(32);
    let mut violations = 0;
    for p in 0..probes {
        let mut s = stream.stream(p as u64);
        let steps = (DYN_T / DYN_DT).round() as usize;
        let i = (s.uniform::<f64>() * steps as f64) as usize % steps;
        let t = i as f64 * DYN_DT;
        let x = [2.0 * s.uniform::<f64>() - 1.0, 2.0 * s.uniform::<f64>() - 1.0];
        let nu = accumulated(t)?.translated(&[0.5 * s.uniform::<f64>(), 0.0]);
        let small = Sampling {
            n_samples: tier.n(500),
            dt: DYN_DT,
            seed: 33 + p as u64,
        };
        let d = estimate_drift(&costs, DYN_T, t, &nu, &x, &small, DriftOptions::default())?;
        if d.max_abs() > bound {
            violations += 1;
        }
    }
    passed &= violations * 100 <= probes;
    z.push(("bound violations".into(), violations as f64));
    let worst = z
        .iter()
        .filter(|(n, _)| n.starts_with("state") || n.starts_with("origin"))
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max);
    Ok(Check {
        passed,
        detail: format!("max |z| = {worst:.2} over 12 components, {violations}/{probes} probes above C_T = {bound:.2}"),
        z,
        payload: json!({"states": payload, "bound": bound, "violations": violations}),
    })
}

/// Scale of one run of the law comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawScale {
    pub n_traj: usize,
    pub n_inner: usize,
    pub n_paths: usize,
}

impl LawScale {
    pub fn for_tier(tier: Tier) -> Self {
        Self {
            n_traj: tier.n(200),
            n_inner: tier.n(20_000),
            n_paths: tier.n(100_000),
        }
    }
}

/// Outcome of the law comparison for one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawRun {
    pub seed: u64,
    pub controlled: LawSummary<f64>,
    pub gibbs: LawSummary<f64>,
    pub z: Vec<(String, f64)>,
    pub ess: f64,
    pub c: f64,
    pub c_se: f64,
    pub realized_cost: f64,
    pub realized_se: f64,
    pub cost_z: f64,
    pub bound_violations: usize,
}

/// Optimal trajectories against Gibbs-weighted Brownian paths for `g_4`
/// started at the origin with an empty base measure.
pub fn law_run(scale: LawScale, seed: u64) -> Result<LawRun, Error> {
    let (sf, costs) = dynamics_costs()?;
    let nu = OccupationMeasure::empty(2);
    let x = [0.0, 0.0];
    let stats = PathStatistic::standard(sf);
    let config = LawConfig {
        n_particles: 1,
        dim: 2,
        horizon: DYN_T,
        dt: DYN_DT,
        start: x.to_vec(),
        base_atoms: 0,
        costs: format!("g_4 quad_step {DYNAMICS_QUAD_STEP}"),
    };
    let optimal = OptimalConfig {
        dt: DYN_DT,
        n_inner: scale.n_inner,
        seed,
        clip: false,
    };
    let trajs = simulate_ensemble(&costs, DYN_T, &nu, &x, &optimal, scale.n_traj)?;
    let controlled = summarize_trajectories(config.clone(), &trajs, &stats, &nu)?;
    let gibbs_sampling = Sampling {
        n_samples: scale.n_paths,
        dt: DYN_DT,
        seed: seed.wrapping_add(1_000_003),
    };
    let report = sample_gibbs(&costs, DYN_T, &nu, &x, &gibbs_sampling, &stats)?;
    let gibbs = LawSummary::from_gibbs(config, &report);
    let cmp = law_equality_test(&controlled, &gibbs)?;
    let realized: Vec<f64> = trajs.iter().map(|t| t.realized_cost()).collect();
    let (realized_cost, realized_se) = mean_and_se(&realized);
    let c = -report.log_z;
    let c_se = report.z.std_error / report.z.mean;
    Ok(LawRun {
        seed,
        controlled,
        gibbs,
        z: cmp.z,
        ess: report.ess,
        c,
        c_se,
        realized_cost,
        realized_se,
        cost_z: zscore(realized_cost - c, (realized_se.powi(2) + c_se.powi(2)).sqrt()),
        bound_violations: trajs.iter().map(|t| t.bound_violations()).sum(),
    })
}

pub const LAW_SEEDS: [u64; 2] = [101, 202];

fn law_equality(tier: Tier) -> Result<Check, Error> {
    let k = tier.k();
    let scale = LawScale::for_tier(tier);
    let min_ess = tier.n(1000) as f64;
    let mut passed = true;
    let mut z = Vec::new();
    let mut details = Vec::new();
    let mut runs = Vec::new();
    for seed in LAW_SEEDS {
        let run = law_run(scale, seed)?;
        let laws = run.z.iter().all(|(_, v)| v.abs() < crate::dynamics::Z_THRESHOLD);
        let ok = laws && run.cost_z.abs() <= k && run.ess > min_ess;
        passed &= ok;
        z.extend(run.z.iter().map(|(n, v)| (format!("seed {seed} {n}"), *v)));
        z.push((format!("seed {seed} cost"), run.cost_z));
        details.push(format!(
            "seed {seed}: max |z| {:.2}, cost {:.4} ± {:.4} vs c {:.4} ± {:.4}, ESS {:.0}",
            run.z.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max),
            run.realized_cost,
            run.realized_se,
            run.c,
            run.c_se,
            run.ess
        ));
        runs.push(run);
    }
    Ok(Check {
        passed,
        detail: details.join("; "),
        z,
        payload: serde_json::to_value(runs)?,
    })
}

/// Reduced versions of criteria 1, 2, 3, 7 and 8.
fn reproducibility_battery() -> Result<Value, Error> {
    let trivial = trivial_feynman_kac()?.payload;
    let bd = boue_dupuis(Tier::Quick)?.payload;
    let (_, costs) = dynamics_costs()?;
    let case = &drift_battery()?[3];
    let sampling = Sampling {
        n_samples: 500,
        dt: DYN_DT,
        seed: 41,
    };
    let drift = estimate_drift(&costs, DYN_T, case.t, &case.nu, &case.x, &sampling, DriftOptions::default())?;
    let fd = drift_by_differences(&costs, case, &sampling, 0.05)?;
    let law = law_run(
        LawScale {
            n_traj: 3,
            n_inner: 200,
            n_paths: 2000,
        },
        7,
    )?;
    Ok(json!({"trivial": trivial, "boue_dupuis": bd, "drift": drift, "difference": fd, "law": law}))
}

fn reproducibility() -> Result<Check, Error> {
    let mut payloads = Vec::new();
    for threads in [1, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        let v = pool.install(reproducibility_battery)?;
        payloads.push(serde_json::to_string(&v)?);
    }
    let same = payloads[0] == payloads[1];
    Ok(Check {
        passed: same,
        detail: format!(
            "payloads of {} bytes with 1 and 8 threads are {}",
            payloads[0].len(),
            if same { "identical" } else { "different" }
        ),
        z: Vec::new(),
        payload: serde_json::from_str(&payloads[0])?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let eps = [1e-3, 5e-4, 2.5e-4];
        let err: Vec<f64> = eps.iter().map(|e| 3.0 * e * e).collect();
        assert!((loglog_slope(&eps, &err) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quick_tier_scales() {
        assert_eq!(Tier::Quick.n(100_000), 10_000);
        assert_eq!(Tier::Full.n(7), 7);
        assert_eq!(Tier::Quick.n(5), 1);
    }
}
