use occupath::dynamics::*;
use occupath::feynman_kac::*;
use occupath::functionals::*;
use occupath::occupation::{OccupationMeasure, PathEnsemble, TimeGrid};

fn sampling(n_samples: usize, dt: f64, seed: u64) -> Sampling<f64> {
    Sampling { n_samples, dt, seed }
}

fn config(dt: f64, n_inner: usize, seed: u64) -> OptimalConfig<f64> {
    OptimalConfig {
        dt,
        n_inner,
        seed,
        clip: false,
    }
}

fn terminal_xy() -> Vec<PathStatistic<f64>> {
    vec![
        PathStatistic::TerminalCoord { particle: 0, axis: 0 },
        PathStatistic::TerminalCoord { particle: 0, axis: 1 },
    ]
}

#[test]
fn zero_cost_trajectory_is_the_brownian_path() {
    let nu = OccupationMeasure::empty(2);
    let x = vec![0.3, -0.2, 1.0, 0.5];
    let dt = 1.0 / 32.0;
    let ens = PathEnsemble::brownian(x.clone(), 2, TimeGrid::uniform(0.5, dt).unwrap(), 3, 5);
    for j in 0..3 {
        let tr = simulate_optimal(&CostPair::zero(), 0.5, &nu, &x, &config(dt, 8, 5), j).unwrap();
        assert_eq!(tr.path, ens.samples[j]);
        assert_eq!(tr.control_energy, 0.0);
        assert!((tr.occupation.total_mass() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn two_particle_sausage_smoke() {
    let sf = SausageFunctional::new(MollifierFamily::standard(4), 0.25).unwrap();
    let costs = CostPair::terminal_only(Terminal::Sausage(sf));
    let nu = OccupationMeasure::empty(2);
    let x = [0.0, 0.0, 0.5, 0.0];
    let dt = 1.0 / 32.0;
    let tr = simulate_optimal(&costs, 0.125, &nu, &x, &config(dt, 32, 9), 0).unwrap();
    assert_eq!(tr.drift_log.len(), 4);
    assert_eq!(tr.path.len(), 5 * 4);
    assert!((tr.occupation.total_mass() - 0.25).abs() < 1e-12);
    assert_eq!(tr.bound_violations(), 0);
    assert!(tr.realized_cost().is_finite() && tr.terminal_cost < 0.0);
}

#[test]
fn zero_cost_gibbs_weights_are_one() {
    let nu = OccupationMeasure::empty(2);
    let r = sample_gibbs(&CostPair::zero(), 1.0, &nu, &[0.0, 0.0], &sampling(500, 0.25, 3), &terminal_xy()).unwrap();
    assert_eq!(r.ess, 500.0);
    assert_eq!(r.log_z, 0.0);
    assert!(r.warning.is_none());
    let ens = PathEnsemble::<f64>::brownian(vec![0.0, 0.0], 1, TimeGrid::uniform(1.0, 0.25).unwrap(), 500, 3);
    let plain: f64 = (0..500).map(|i| ens.path(i).at(4)[0]).sum::<f64>() / 500.0;
    assert!((r.statistics[0].mean - plain).abs() < 1e-12);
}

#[test]
fn linear_tilt_shifts_the_terminal_mean() {
    let costs = CostPair::terminal_only(Terminal::Linear(vec![1.0, 0.0]));
    let nu = OccupationMeasure::empty(2);
    let r = sample_gibbs(&costs, 1.0, &nu, &[0.0, 0.0], &sampling(40_000, 0.25, 4), &terminal_xy()).unwrap();
    for (s, want) in r.statistics.iter().zip([-1.0, 0.0]) {
        assert!((s.mean - want).abs() < 3.0 * s.std_error, "{s:?}");
    }
}

#[test]
fn linear_laws_agree() {
    let costs = CostPair::terminal_only(Terminal::Linear(vec![0.7, -0.4]));
    let nu = OccupationMeasure::empty(2);
    let x = [0.1, 0.2];
    let dt = 1.0 / 16.0;
    let trajs = simulate_ensemble(&costs, 1.0, &nu, &x, &config(dt, 4, 6), 2000).unwrap();
    for tr in &trajs[..3] {
        for d in &tr.drift_log {
            assert!((d.drift[0] + 0.7).abs() < 1e-12 && (d.drift[1] - 0.4).abs() < 1e-12);
        }
    }
    let law = LawConfig {
        n_particles: 1,
        dim: 2,
        horizon: 1.0,
        dt,
        start: x.to_vec(),
        base_atoms: 0,
        costs: "linear".into(),
    };
    let stats = terminal_xy();
    let a = summarize_trajectories(law.clone(), &trajs, &stats, &nu).unwrap();
    let r = sample_gibbs(&costs, 1.0, &nu, &x, &sampling(20_000, dt, 7), &stats).unwrap();
    let b = LawSummary::from_gibbs(law.clone(), &r);
    let cmp = law_equality_test(&a, &b).unwrap();
    assert!(cmp.passed, "{cmp:?}");

    let other = LawSummary::from_gibbs(LawConfig { dt: 0.125, ..law }, &r);
    assert!(matches!(law_equality_test(&a, &other), Err(DynamicsError::Mismatch(_))));
}

#[test]
fn self_repulsion_spreads_the_path() {
    let sf = SausageFunctional::new(MollifierFamily::standard(4), 0.25).unwrap();
    let costs = CostPair::terminal_only(Terminal::Sausage(sf));
    let nu = OccupationMeasure::empty(2);
    let stats = [PathStatistic::TerminalNorm { particle: 0 }];
    // same paths, weighted and unweighted
    let s = sampling(4000, 1.0 / 16.0, 8);
    let tilted = sample_gibbs(&costs, 1.0, &nu, &[0.0, 0.0], &s, &stats).unwrap();
    let plain = sample_gibbs(&CostPair::zero(), 1.0, &nu, &[0.0, 0.0], &s, &stats).unwrap();
    let (a, b) = (&tilted.statistics[0], &plain.statistics[0]);
    assert!(a.mean - b.mean > 3.0 * a.std_error.max(b.std_error), "{a:?} vs {b:?}");
}

#[test]
fn mollified_energy_approaches_the_exact_sausage() {
    let nu = OccupationMeasure::empty(2);
    let x = [0.0, 0.0];
    let s = sampling(200, 1.0 / 32.0, 12);
    let stats = [PathStatistic::TerminalNorm { particle: 0 }];
    let exact = CostPair::terminal_only(Terminal::ExactSausage { radius: 1.0, grid_h: 0.02 });
    let c_exact = -sample_gibbs(&exact, 0.25, &nu, &x, &s, &stats).unwrap().log_z;
    let gaps: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&l| {
            let sf = SausageFunctional::new(MollifierFamily::standard(l), 0.1).unwrap();
            let costs = CostPair::terminal_only(Terminal::Sausage(sf));
            let c = -sample_gibbs(&costs, 0.25, &nu, &x, &s, &stats).unwrap().log_z;
            (c - c_exact).abs()
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn degenerate_weights_raise_a_warning() {
    let costs = CostPair::terminal_only(Terminal::Linear(vec![30.0, 0.0]));
    let nu = OccupationMeasure::empty(2);
    let r = sample_gibbs(&costs, 1.0, &nu, &[0.0, 0.0], &sampling(200, 0.5, 1), &terminal_xy()).unwrap();
    assert!(r.ess < MIN_ESS);
    assert!(r.warning.is_some());
}
