use std::f64::consts::PI;
use std::sync::Arc;

use occupath::functionals::*;
use occupath::harness::derivative_ladder;
use occupath::occupation::OccupationMeasure;
use proptest::prelude::*;

// Independent transcription of f_4 with cutoffs 2 and 4.
fn f4(s: f64) -> f64 {
    if s >= 4.0 {
        return 0.0;
    }
    let t = ((s - 2.0) / 2.0).clamp(0.0, 1.0);
    let chi = 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    (4.0 * (1.0 - s)).exp() * chi
}

/// `2 pi int_0^2 F(r) r dr` by composite Simpson.
fn disc_integral(f: impl Fn(f64) -> f64) -> f64 {
    let n = 20_000;
    let h = 2.0 / n as f64;
    let mut acc = f(0.0) * 0.0 + f(2.0) * 2.0;
    for i in 1..n {
        let r = i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(r) * r;
    }
    2.0 * PI * acc * h / 3.0
}

fn sausage(level: u32, h: f64) -> SausageFunctional<f64> {
    SausageFunctional::new(MollifierFamily::standard(level), h).unwrap()
}

fn origin() -> OccupationMeasure<f64> {
    OccupationMeasure::dirac(&[0.0, 0.0], 1.0).unwrap()
}

#[test]
fn g_ell_of_a_unit_atom_matches_the_radial_oracle() {
    let oracle = -disc_integral(|r| 1.0 - (-f4(r * r)).exp());
    let g = sausage(4, 0.02).g_ell(&origin());
    assert!((g - oracle).abs() < 1e-3, "g = {g}, oracle = {oracle}");
    assert_eq!(sausage(4, 0.02).g_ell(&OccupationMeasure::empty(2)), 0.0);
}

#[test]
fn flat_derivative_matches_the_radial_oracle() {
    let sf = sausage(4, 0.02);
    let at_atom = -disc_integral(|r| (-f4(r * r)).exp() * f4(r * r));
    let d = sf.delta_mu_g(&origin(), &[0.0, 0.0]);
    assert!((d - at_atom).abs() < 1e-3, "{d} vs {at_atom}");

    // empty base: -int f_l, whatever the point
    let mass = disc_integral(|r| f4(r * r));
    for y in [[0.0, 0.0], [0.37, -1.2], [5.0, 5.01]] {
        let d = sf.delta_mu_g(&OccupationMeasure::empty(2), &y);
        assert!((d + mass).abs() < 1e-3 * mass, "{d} vs {}", -mass);
    }
}

#[test]
fn symmetric_configurations_have_zero_gradient() {
    let sf = sausage(4, 0.05);
    for (nu, y) in [
        (OccupationMeasure::empty(2), [0.3, -0.7]),
        (origin(), [0.0, 0.0]),
    ] {
        let g = sf.grad_delta_mu_g(&nu, &y);
        assert!(g.iter().all(|v| v.abs() < 1e-10), "{g:?}");
    }
}

#[test]
fn gradient_matches_central_differences() {
    let sf = sausage(4, 0.05);
    let nu = OccupationMeasure::from_atoms(
        2,
        [(vec![0.1, 0.2], 0.4), (vec![-0.5, 0.3], 0.25), (vec![0.7, -0.6], 0.1)],
    )
    .unwrap();
    let y = [0.23, -0.41];
    let g = sf.grad_delta_mu_g(&nu, &y);
    let h = 1e-4;
    for a in 0..2 {
        let (mut p, mut m) = (y, y);
        p[a] += h;
        m[a] -= h;
        let fd = (sf.delta_mu_g(&nu, &p) - sf.delta_mu_g(&nu, &m)) / (2.0 * h);
        assert!((fd - g[a]).abs() <= 1e-6 * g[a].abs().max(1.0), "axis {a}: {fd} vs {}", g[a]);
    }
}

#[test]
fn forward_differences_converge_at_first_order() {
    let sf = sausage(4, 0.05);
    let nu = OccupationMeasure::from_atoms(2, [(vec![0.2, 0.0], 0.3), (vec![-0.4, 0.5], 0.2)]).unwrap();
    let (y, y2) = ([0.1, 0.3], [0.4, 0.1]);
    let d1 = sf.delta_mu_g(&nu, &y);
    let d2 = sf.delta2_mu_g(&nu, &y, &y2);
    let err = |eps: f64| {
        let fd1 = (sf.g_ell(&nu.perturb(&y, eps).unwrap()) - sf.g_ell(&nu)) / eps;
        let fd2 = (sf.delta_mu_g(&nu.perturb(&y2, eps).unwrap(), &y) - d1) / eps;
        ((fd1 - d1).abs(), (fd2 - d2).abs())
    };
    let (a, b) = (err(1e-4), err(5e-5));
    assert!((a.0 / b.0 - 2.0).abs() < 0.1, "{a:?} {b:?}");
    assert!((a.1 / b.1 - 2.0).abs() < 0.1, "{a:?} {b:?}");
}

#[test]
fn second_derivative_is_symmetric_and_local() {
    let sf = sausage(4, 0.05);
    let nu = OccupationMeasure::from_atoms(2, [(vec![0.0, 0.0], 0.5), (vec![1.0, 0.5], 0.5)]).unwrap();
    let (y, y2) = ([0.2, 0.1], [-0.3, 0.9]);
    assert_eq!(sf.delta2_mu_g(&nu, &y, &y2), sf.delta2_mu_g(&nu, &y2, &y));
    // kernel supports of radius 2 are disjoint
    assert_eq!(sf.delta2_mu_g(&nu, &y, &[4.3, 0.1]), 0.0);
}

#[test]
fn tampered_ladder_fails() {
    assert!(derivative_ladder(1.0).passed);
    assert!(!derivative_ladder(-1.0).passed);
}

#[test]
fn sausage_volume_of_a_ball() {
    let nu = OccupationMeasure::dirac(&[0.0, 0.0, 0.0], 1.0).unwrap();
    let v = sausage_volume(Support::Atoms(&nu), 1.0, 0.02).unwrap();
    assert!((v.value - 4.0 * PI / 3.0).abs() < 0.05, "{v:?}");
}

#[test]
fn g_ell_approaches_minus_the_disc_area() {
    let nu = origin();
    let gaps: Vec<f64> = [2, 4, 8, 16]
        .iter()
        .map(|&l| (sausage(l, 0.02).g_ell(&nu) + PI).abs())
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[3] < 0.15);
}

#[test]
fn cylindrical_derivative_matches_perturbation() {
    let phi: Arc<dyn TestFunction<f64>> = Arc::new(Plateau::new(vec![0.2, 0.0], 0.3, 1.5, 1.0));
    let psi: Arc<dyn TestFunction<f64>> = Arc::new(Plateau::new(vec![-0.4, 0.3], 0.0, 1.0, 2.0));
    let u = CylindricalFunctional::new(vec![phi, psi], Arc::new(Product));
    let mu = OccupationMeasure::from_atoms(2, [(vec![0.0, 0.1], 0.6), (vec![-0.2, 0.4], 0.3)]).unwrap();
    let y = [0.1, 0.2];
    let d = u.derivative(&mu).at(&y);
    let err = |eps: f64| ((u.value(&mu.perturb(&y, eps).unwrap()) - u.value(&mu)) / eps - d).abs();
    let (a, b) = (err(1e-5), err(5e-6));
    assert!(a < 1e-4 && (a / b - 2.0).abs() < 0.2, "{a} {b}");
}

fn small_measure() -> impl Strategy<Value = Vec<(Vec<f64>, f64)>> {
    prop::collection::vec((prop::collection::vec(-1.5..1.5f64, 2), 0.01..1.0f64), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn g_ell_is_bounded_by_the_padded_sausage(atoms in small_measure()) {
        let nu = OccupationMeasure::from_atoms(2, atoms).unwrap();
        let g = sausage(4, 0.05).g_ell(&nu);
        let vol = sausage_volume(Support::Atoms(&nu), 2.0, 0.02).unwrap().value;
        prop_assert!(g <= 0.0);
        prop_assert!(-g <= vol * 1.01, "g = {}, volume = {}", g, vol);
    }

    #[test]
    fn derivatives_respect_their_bounds(atoms in small_measure(), y in prop::collection::vec(-2.0..2.0f64, 2)) {
        let sf = sausage(4, 0.1);
        let nu = OccupationMeasure::from_atoms(2, atoms).unwrap();
        let b = sf.bounds(2);
        prop_assert!(sf.delta_mu_g(&nu, &y).abs() <= b.delta);
        let g = sf.grad_delta_mu_g(&nu, &y);
        prop_assert!((g[0] * g[0] + g[1] * g[1]).sqrt() <= b.grad_delta);
        prop_assert!(sf.delta2_mu_g(&nu, &y, &y).abs() <= b.delta2);
    }

    #[test]
    fn lattice_shifts_leave_g_ell_unchanged(atoms in small_measure(), i in -20i32..20, j in -20i32..20) {
        let sf = sausage(4, 0.1);
        let nu = OccupationMeasure::from_atoms(2, atoms).unwrap();
        let moved = nu.translated(&[0.1 * i as f64, 0.1 * j as f64]);
        let (a, b) = (sf.g_ell(&nu), sf.g_ell(&moved));
        prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn mollifier_blows_up_monotonically(s in 0.0..4.5f64, level in 1u32..16) {
        let lo = MollifierFamily::<f64>::standard(level);
        let hi = MollifierFamily::<f64>::standard(level + 1);
        let (a, b) = (lo.value(s), hi.value(s));
        if s < 1.0 {
            prop_assert!(b >= a);
        } else {
            prop_assert!(b <= a);
        }
        prop_assert!(lo.eval(s).first <= 0.0);
        prop_assert!((lo.value(1.0) - 1.0).abs() < 1e-15);
    }
}
