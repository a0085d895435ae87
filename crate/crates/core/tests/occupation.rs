use num_rational::Ratio;
use occupath::occupation::{MeasureRepr, OccupationMeasure, PathEnsemble, TimeGrid};
use occupath::stats::mean_and_se;
use proptest::prelude::*;

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[test]
fn rational_mass_telescopes_exactly() {
    // n = 3 particles, T = 2, M = 7 steps of dt = 2/7
    let dt = Ratio::new(2i64, 7);
    let mut mu = OccupationMeasure::from_atoms(2, [(vec![Ratio::from_integer(1), Ratio::new(1, 3)], Ratio::new(1, 5))])
        .unwrap();
    for i in 0..7i64 {
        let pts: Vec<Ratio<i64>> = (0..6).map(|c| Ratio::new(i * c - 3, 4)).collect();
        mu.push_segment(&pts, dt).unwrap();
    }
    assert_eq!(mu.total_mass(), Ratio::new(1, 5) + Ratio::from_integer(3 * 2));
    assert_eq!(mu.len(), 1 + 7 * 3);
}

#[test]
fn small_cases() {
    let empty = OccupationMeasure::<f64>::empty(2);
    assert_eq!(empty.pair(|_| 1.0), 0.0);
    assert!(empty.bounding_box().is_none());
    let one = OccupationMeasure::dirac(&[0.3, -1.0], 0.7).unwrap();
    assert_eq!(one.pair(|_| 1.0), 0.7);
    let appended = empty.append_occupation(&[1.0, 2.0], 0.01).unwrap();
    assert_eq!(appended.total_mass(), 0.01);
}

#[test]
fn invalid_atoms_are_rejected() {
    let mut m = OccupationMeasure::<f64>::empty(2);
    assert!(m.push_atom(&[0.0], 1.0).is_err());
    assert!(m.push_atom(&[0.0, 0.0], -1.0).is_err());
    assert!(m.perturb(&[0.0, 0.0], -0.1).is_err());
    assert!(OccupationMeasure::<f64>::from_atoms(0, []).is_err());
}

fn atoms() -> impl Strategy<Value = Vec<(Vec<f64>, f64)>> {
    prop::collection::vec((prop::collection::vec(-3.0..3.0f64, 2), 0.0..2.0f64), 0..12)
}

proptest! {
    #[test]
    fn perturbation_is_linear(atoms in atoms(), y in prop::collection::vec(-3.0..3.0f64, 2), eps in 0.0..1.0f64) {
        let mu = OccupationMeasure::from_atoms(2, atoms).unwrap();
        let phi = |v: &[f64]| (v[0] - 0.5).sin() + v[1] * v[1];
        let diff = mu.perturb(&y, eps).unwrap().pair(phi) - mu.pair(phi);
        prop_assert!((diff - eps * phi(&y)).abs() <= 1e-12 * (1.0 + mu.pair(|v| phi(v).abs())));
        prop_assert_eq!(mu.perturb(&y, 0.0).unwrap().pair(phi), mu.pair(phi));
    }

    #[test]
    fn append_adds_dt_times_particle_values(
        atoms in atoms(),
        pts in prop::collection::vec(-3.0..3.0f64, 2..=8).prop_filter("whole particles", |v| v.len() % 2 == 0),
        dt in 1e-4..1.0f64,
    ) {
        let mu = OccupationMeasure::from_atoms(2, atoms).unwrap();
        let phi = |v: &[f64]| (v[0] * v[1]).cos();
        let next = mu.append_occupation(&pts, dt).unwrap();
        let expect = mu.pair(phi) + dt * pts.chunks(2).map(phi).sum::<f64>();
        prop_assert!((next.pair(phi) - expect).abs() < 1e-12 * (1.0 + expect.abs()));
        let n = (pts.len() / 2) as f64;
        prop_assert!((next.total_mass() - mu.total_mass() - n * dt).abs() < 1e-12 * (1.0 + next.total_mass()));
    }

    #[test]
    fn json_round_trip(atoms in atoms()) {
        let mu = OccupationMeasure::from_atoms(2, atoms).unwrap();
        let text = serde_json::to_string(&mu).unwrap();
        let back: OccupationMeasure<f64> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &mu);
        let repr: MeasureRepr<f64> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(repr.atoms.len(), mu.len());
    }

    #[test]
    fn translation_moves_the_bounding_box(atoms in atoms(), v in prop::collection::vec(-2.0..2.0f64, 2)) {
        let mu = OccupationMeasure::from_atoms(2, atoms).unwrap();
        let moved = mu.translated(&v);
        match (mu.bounding_box(), moved.bounding_box()) {
            (Some((lo, hi)), Some((lo2, hi2))) => {
                for a in 0..2 {
                    prop_assert!((lo2[a] - lo[a] - v[a]).abs() < 1e-12);
                    prop_assert!((hi2[a] - hi[a] - v[a]).abs() < 1e-12);
                }
            }
            (None, None) => {}
            _ => prop_assert!(false, "translation changed emptiness"),
        }
    }
}

/// Left-endpoint occupation of a frozen path against the time integral of
/// `|B_s|^2` on a much finer grid: the error is first order in the step.
#[test]
fn occupation_pairing_converges_in_dt() {
    let fine = TimeGrid::uniform(1.0, 1e-5).unwrap();
    let ens = PathEnsemble::brownian(vec![0.2, -0.1], 1, fine, 20, 404);
    let mut errs = [0.0f64; 2];
    for j in 0..ens.len() {
        let path = &ens.samples[j];
        let vals: Vec<f64> = path.chunks(2).map(sq).collect();
        let exact: f64 = vals.windows(2).map(|w| 0.5 * 1e-5 * (w[0] + w[1])).sum();
        for (e, factor) in errs.iter_mut().zip([1000usize, 100]) {
            let coarse = ens.coarsen(factor).unwrap();
            let p = coarse.path(j);
            let dt = coarse.time_grid.dt();
            let mu = p.occupation(&OccupationMeasure::empty(2), coarse.time_grid.steps(), dt);
            *e += (mu.pair(sq) - exact).abs();
        }
    }
    let ratio = errs[0] / errs[1];
    assert!((5.0..20.0).contains(&ratio), "errors {errs:?}, ratio {ratio}");
}

#[test]
fn brownian_increments_have_the_right_law() {
    let grid = TimeGrid::uniform(1.0, 0.25).unwrap();
    let x = vec![1.0, -2.0];
    let ens = PathEnsemble::brownian(x.clone(), 1, grid, 100_000, 9);
    for i in 0..ens.len() {
        assert_eq!(ens.path(i).at(0), &x[..]);
    }
    for step in 0..4 {
        for c in 0..2 {
            let inc: Vec<f64> = (0..ens.len())
                .map(|i| ens.path(i).at(step + 1)[c] - ens.path(i).at(step)[c])
                .collect();
            let (m, se) = mean_and_se(&inc);
            assert!((m / se).abs() < 4.0, "step {step} axis {c}: mean {m} se {se}");
            let sq: Vec<f64> = inc.iter().map(|v| v * v).collect();
            let (v, vse) = mean_and_se(&sq);
            assert!(((v - 0.25) / vse).abs() < 4.0, "variance {v} se {vse}");
        }
    }
}

#[test]
fn ensembles_are_reproducible_and_serialise() {
    let grid = TimeGrid::uniform(0.5, 0.125).unwrap();
    let a = PathEnsemble::brownian(vec![0.0; 4], 2, grid.clone(), 16, 3);
    let b = PathEnsemble::brownian(vec![0.0; 4], 2, grid, 16, 3);
    assert_eq!(a, b);
    let back: PathEnsemble<f64> = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
    assert_eq!(back, a);
    let coarse = a.coarsen(2).unwrap();
    assert_eq!(coarse.path(5).at(1), a.path(5).at(2));
    assert!(a.coarsen(3).is_err());
}

#[test]
fn occupation_mass_is_n_times_horizon() {
    let grid = TimeGrid::uniform(1.0, 0.01).unwrap();
    let ens = PathEnsemble::<f64>::brownian(vec![0.0; 6], 3, grid.clone(), 4, 1);
    let mu = ens.path(2).occupation(&OccupationMeasure::empty(2), grid.steps(), grid.dt());
    assert!((mu.total_mass() - 3.0).abs() < 1e-12);
}
