use std::sync::Arc;

use occupath::feynman_kac::*;
use occupath::functionals::*;
use occupath::occupation::*;
use occupath::rng::Substreams;

fn bump(c: [f64; 2], r: f64) -> Arc<dyn TestFunction<f64>> {
    Arc::new(Plateau::new(c.to_vec(), 0.3, r, 1.0))
}

fn path(n: usize, steps: usize, dt: f64, seed: u64) -> Vec<f64> {
    let x: Vec<f64> = (0..n).flat_map(|k| [0.4 * k as f64, -0.2]).collect();
    let sampler = BrownianSampler::new(x, n, TimeGrid::with_steps(dt * steps as f64, steps));
    let mut buf = vec![0.0; sampler.path_len()];
    sampler.fill(&mut Substreams::new(seed).stream(0), &mut buf);
    buf
}

fn shifted(p: &[f64], n: usize, k: usize, a: usize, eps: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    for step in q.chunks_exact_mut(2 * n) {
        step[2 * k + a] += eps;
    }
    q
}

// G is the derivative of g + int f along a rigid shift of one particle's path.
fn check_pathwise_gradient(costs: &CostPair<f64>, nu: &OccupationMeasure<f64>, tol: f64) {
    let (n, steps, dt) = (2, 12, 1.0 / 32.0);
    let p = path(n, steps, dt, 5);
    let prepared = costs.prepare(nu);
    let mut ws = Workspace::new();
    let total = |q: &[f64], ws: &mut Workspace<f64>| {
        let c = prepared.evaluate(&PathRef::new(q, n, 2), n, dt, false, ws).unwrap();
        c.running + c.terminal
    };
    prepared.evaluate(&PathRef::new(&p, n, 2), n, dt, true, &mut ws).unwrap();
    let g = ws.gradient().to_vec();
    let eps = 1e-5;
    for k in 0..n {
        for a in 0..2 {
            let fd = (total(&shifted(&p, n, k, a, eps), &mut ws) - total(&shifted(&p, n, k, a, -eps), &mut ws)) / (2.0 * eps);
            let got = g[2 * k + a];
            assert!((fd - got).abs() <= tol * (1.0 + got.abs()), "particle {k} axis {a}: fd {fd} vs {got}");
        }
    }
}

#[test]
fn sausage_gradient_is_the_pathwise_derivative() {
    let sf = SausageFunctional::new(MollifierFamily::standard(4), 0.1).unwrap();
    let costs = CostPair::terminal_only(Terminal::Sausage(sf));
    let mut nu = OccupationMeasure::empty(2);
    nu.push_atom(&[0.7, 0.1], 0.05).unwrap();
    check_pathwise_gradient(&costs, &nu, 1e-6);
}

#[test]
fn cylindrical_costs_gradient_is_the_pathwise_derivative() {
    let g = CylindricalFunctional::new(vec![bump([0.0, 0.0], 1.5), bump([0.5, -0.5], 1.2)], Arc::new(Product));
    let f = CylindricalFunctional::new(vec![bump([0.2, 0.1], 1.0)], Arc::new(Square { scale: 3.0 }));
    let costs = CostPair::new(Running::Cylindrical(f), Terminal::Cylindrical(g));
    let nu = OccupationMeasure::dirac(&[0.1, 0.2], 0.3).unwrap();
    check_pathwise_gradient(&costs, &nu, 1e-7);
}

#[test]
fn linear_costs_gradient_is_the_pathwise_derivative() {
    let costs = CostPair::new(Running::Linear(vec![0.5, -1.0, 2.0, 0.0]), Terminal::Linear(vec![1.0, 2.0, -3.0, 0.5]));
    check_pathwise_gradient(&costs, &OccupationMeasure::empty(2), 1e-8);
}

fn sampling(n_samples: usize, dt: f64, seed: u64) -> Sampling<f64> {
    Sampling { n_samples, dt, seed }
}

#[test]
fn unit_running_cost_is_deterministic() {
    let costs = CostPair::new(Running::Constant(1.0), Terminal::Constant(0.0));
    let nu = OccupationMeasure::empty(2);
    let u = estimate_u(&costs, 1.0, 0.0, &nu, &[0.0, 0.0], &sampling(100, 1.0 / 64.0, 1)).unwrap();
    assert!((u.mean - (-1.0f64).exp()).abs() < 1e-12);
    assert_eq!(u.std_error, 0.0);
    let c = estimate_c(&costs, 1.0, 0.0, &nu, &[0.0, 0.0], &sampling(100, 1.0 / 64.0, 1)).unwrap();
    assert!((c.mean - 1.0).abs() < 1e-12);
}

#[test]
fn occupation_mass_cost_is_exact() {
    // phi = 1 on the whole reachable region: g(theta_T) = T
    let phi: Arc<dyn TestFunction<f64>> = Arc::new(Plateau::new(vec![0.0, 0.0], 100.0, 200.0, 1.0));
    let costs = CostPair::terminal_only(Terminal::Cylindrical(CylindricalFunctional::linear(phi)));
    let u = estimate_u(&costs, 0.5, 0.0, &OccupationMeasure::empty(2), &[0.0, 0.0], &sampling(200, 1.0 / 64.0, 4)).unwrap();
    assert!((u.mean - (-0.5f64).exp()).abs() < 1e-12, "{u:?}");
}

// A plain loop over fresh paths: the full occupation measure is rebuilt and
// g_l evaluated from scratch.
#[test]
fn sausage_value_agrees_with_a_direct_loop() {
    let sf = SausageFunctional::new(MollifierFamily::standard(4), 0.25).unwrap();
    let costs = CostPair::terminal_only(Terminal::Sausage(sf));
    let (t, dt, n) = (0.25, 1.0 / 128.0, 20_000);
    let nu = OccupationMeasure::empty(2);
    let c = estimate_c(&costs, t, 0.0, &nu, &[0.0, 0.0], &sampling(n, dt, 1)).unwrap();

    let grid = TimeGrid::uniform(t, dt).unwrap();
    let sampler = BrownianSampler::new(vec![0.0, 0.0], 1, grid.clone());
    let streams = Substreams::new(77);
    let mut w = Vec::with_capacity(n);
    let mut buf = vec![0.0; sampler.path_len()];
    for i in 0..n {
        sampler.fill(&mut streams.stream(i as u64), &mut buf);
        let mut mu = OccupationMeasure::empty(2);
        for step in buf.chunks(2).take(grid.steps()) {
            mu.push_atom(step, dt).unwrap();
        }
        w.push((-sf.g_ell(&mu)).exp());
    }
    let m = w.iter().sum::<f64>() / n as f64;
    let var = w.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
    let (oracle, oracle_se) = (-m.ln(), (var / n as f64).sqrt() / m);
    let z = (c.mean - oracle) / (c.std_error.powi(2) + oracle_se.powi(2)).sqrt();
    assert!(z.abs() < 3.0, "c = {c:?}, oracle = {oracle} ± {oracle_se}");
}

#[test]
fn boue_dupuis_for_a_linear_cost() {
    let lambda = vec![1.0, 0.0];
    let costs = CostPair::terminal_only(Terminal::Linear(lambda.clone()));
    let nu = OccupationMeasure::empty(2);
    let x = [0.0, 0.0];
    let s = sampling(20_000, 1.0 / 16.0, 3);
    let c = estimate_c(&costs, 1.0, 0.0, &nu, &x, &s).unwrap();
    assert!(((c.mean + 0.5) / c.std_error).abs() < 3.0, "{c:?}");
    let best = control_cost(&ConstantPolicy(vec![-1.0, 0.0]), &costs, 1.0, &nu, &x, &s).unwrap();
    assert!(((best.mean + 0.5) / best.std_error).abs() < 3.0, "{best:?}");
    let idle = control_cost(&ConstantPolicy(vec![0.0, 0.0]), &costs, 1.0, &nu, &x, &s).unwrap();
    assert!((idle.mean / idle.std_error).abs() < 3.0, "{idle:?}");
    assert!(idle.mean - best.mean > 3.0 * (idle.std_error.powi(2) + best.std_error.powi(2)).sqrt());

    let zero = control_cost(&ConstantPolicy(vec![0.0, 0.0]), &CostPair::zero(), 1.0, &nu, &x, &s).unwrap();
    assert_eq!((zero.mean, zero.std_error), (0.0, 0.0));
}

#[test]
fn ito_residuals() {
    let nu = OccupationMeasure::empty(2);
    let x = [0.3, -0.2];
    let constant = ItoFunctional {
        psi: CylindricalFunctional::constant(2.0),
        q: SpaceTime::One,
    };
    let r = ito_residual(&constant, 1.0, &nu, &x, &sampling(100, 0.1, 1)).unwrap();
    assert_eq!((r.mean, r.std_error), (0.0, 0.0));

    let square = ItoFunctional {
        psi: CylindricalFunctional::constant(1.0),
        q: SpaceTime::SquaredNorm,
    };
    let r = ito_residual(&square, 1.0, &nu, &x, &sampling(20_000, 1.0 / 32.0, 2)).unwrap();
    assert!(r.mean < 3.0 * r.std_error, "{r:?}");

    let linear = ItoFunctional {
        psi: CylindricalFunctional::linear(bump([0.0, 0.0], 2.0)),
        q: SpaceTime::One,
    };
    let coarse = ito_residual(&linear, 1.0, &nu, &x, &sampling(5_000, 1.0 / 16.0, 3)).unwrap();
    let fine = ito_residual(&linear, 1.0, &nu, &x, &sampling(5_000, 1.0 / 32.0, 3)).unwrap();
    assert!(coarse.mean / fine.mean > 1.6, "{coarse:?} {fine:?}");
}

#[test]
fn estimates_are_reproducible() {
    let sf = SausageFunctional::new(MollifierFamily::standard(4), 0.25).unwrap();
    let costs = CostPair::terminal_only(Terminal::Sausage(sf));
    let nu = OccupationMeasure::dirac(&[0.2, 0.0], 0.1).unwrap();
    let run = |seed| estimate_u(&costs, 0.25, 0.0, &nu, &[0.0, 0.0], &sampling(500, 1.0 / 64.0, seed)).unwrap();
    assert_eq!(run(5), run(5));
    assert_ne!(run(5).mean, run(6).mean);
}
