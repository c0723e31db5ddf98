use mckean_core::pde::{self, cfl_dt};
use mckean_core::*;
use proptest::prelude::*;

fn quartic() -> ConfiningPotential {
    validate_confining(&[0.0, 0.0, -0.5, 0.0, 0.25]).unwrap()
}

fn interaction() -> impl Strategy<Value = InteractionPotential> {
    (0.0..2.0_f64, 0.0..0.5_f64, any::<bool>()).prop_map(|(c2, c4, quartic)| {
        if quartic {
            validate_interaction(&[0.0, 0.0, c2, 0.0, c4]).unwrap()
        } else {
            validate_interaction(&[0.0, 0.0, c2.max(1e-3)]).unwrap()
        }
    })
}

fn moments(k: usize) -> impl Strategy<Value = MomentVector> {
    prop::collection::vec(-3.0..3.0_f64, k + 1).prop_map(MomentVector::new)
}

fn mixture() -> impl Strategy<Value = DensitySpec> {
    prop::collection::vec((0.1..1.0_f64, -1.5..1.5_f64, 0.1..0.6_f64), 1..4)
        .prop_map(DensitySpec::Mixture)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convolution_is_linear_in_moments(
        f in interaction(),
        m1 in moments(4),
        m2 in moments(4),
        a in -2.0..2.0_f64,
        b in -2.0..2.0_f64,
        x in -3.0..3.0_f64,
    ) {
        let mixed = MomentVector::new(
            m1.as_slice().iter().zip(m2.as_slice()).map(|(p, q)| a * p + b * q).collect(),
        );
        let lhs = f.convolve(&mixed).unwrap().eval(x);
        let rhs = a * f.convolve(&m1).unwrap().eval(x) + b * f.convolve(&m2).unwrap().eval(x);
        prop_assert!(close(lhs, rhs, 1e-11), "{lhs} vs {rhs}");
    }

    #[test]
    fn convolution_with_point_mass_is_a_shift(
        f in interaction(),
        c in -2.0..2.0_f64,
        x in -3.0..3.0_f64,
    ) {
        let conv = f.convolve(&MomentVector::dirac(c, 4)).unwrap().eval(x);
        prop_assert!(close(conv, f.value(x - c), 1e-12));
        let conv_d1 = f.convolve_d1(&MomentVector::dirac(c, 4)).unwrap().eval(x);
        prop_assert!(close(conv_d1, f.d1().eval(x - c), 1e-12));
    }

    #[test]
    fn convolution_commutes_with_derivative(f in interaction(), m in moments(4), x in -3.0..3.0_f64) {
        let lhs = f.convolve(&m).unwrap().deriv(1).eval(x);
        let rhs = f.convolve_d1(&m).unwrap().eval(x);
        prop_assert!(close(lhs, rhs, 1e-11));
    }

    #[test]
    fn free_energy_is_bounded_below(spec in mixture(), eps in 0.05..2.0_f64, f in interaction()) {
        let v = quartic();
        let grid = Grid::for_potential(&v, eps, 401).unwrap();
        let u = spec.sample(&grid).unwrap();
        prop_assert!(free_energy(&u, &v, &f, eps).total >= free_energy_lower_bound(&v, eps));
    }

    #[test]
    fn free_energy_is_reflection_invariant(spec in mixture(), eps in 0.05..1.0_f64, f in interaction()) {
        let v = quartic();
        let grid = Grid::for_potential(&v, eps, 401).unwrap();
        let u = spec.sample(&grid).unwrap();
        prop_assert_eq!(
            free_energy(&u, &v, &f, eps).total,
            free_energy(&u.reflect(), &v, &f, eps).total
        );
    }

    #[test]
    fn fast_drift_matches_pairwise(
        x in prop::collection::vec(-3.0..3.0_f64, 2..64),
        f in interaction(),
    ) {
        let v = quartic();
        let fast = drift_all(&x, &v, &f);
        let slow = drift_all_pairwise(&x, &v, &f);
        let scale = slow.iter().fold(1.0_f64, |m, b| m.max(b.abs()));
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn drift_is_exchangeable_and_odd(
        x in prop::collection::vec(-3.0..3.0_f64, 2..40),
        f in interaction(),
        rot in 0usize..40,
    ) {
        let v = quartic();
        let b = drift_all_pairwise(&x, &v, &f);
        let k = rot % x.len();
        let mut y = x.clone();
        y.rotate_left(k);
        let mut expected = b.clone();
        expected.rotate_left(k);
        let by = drift_all_pairwise(&y, &v, &f);
        for (p, q) in by.iter().zip(&expected) {
            prop_assert!((p - q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
        let neg: Vec<f64> = x.iter().map(|z| -z).collect();
        for (p, q) in drift_all_pairwise(&neg, &v, &f).iter().zip(&b) {
            prop_assert!((p + q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn laplace_ratio_ignores_constant_shift(c in -50.0..50.0_f64, tilt in -0.2..0.2_f64, eps in 0.05..0.5_f64) {
        let u = Polynomial::new(vec![0.0, tilt, -0.5, 0.0, 0.25]);
        let shifted = u.add(&Polynomial::constant(c));
        for l in [1, 2] {
            let a = laplace_ratio(&u, eps, l).unwrap();
            let b = laplace_ratio(&shifted, eps, l).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn step_conserves_mass_and_commutes_with_reflection(
        spec in mixture(),
        eps in 0.1..1.0_f64,
        f in interaction(),
    ) {
        let v = quartic();
        let grid = Grid::for_potential(&v, eps, 201).unwrap();
        let u = spec.sample(&grid).unwrap();
        let cfg = SolverConfig::new(eps, cfl_dt(&u, &v, &f, eps), 1.0).unwrap();
        let mut a = u.clone();
        let mut b = u.reflect();
        for _ in 0..20 {
            a = pde::step(&a, &cfg, &v, &f).unwrap();
            b = pde::step(&b, &cfg, &v, &f).unwrap();
        }
        prop_assert!((a.mass() - 1.0).abs() < 1e-12);
        prop_assert!(a.reflect().sup_distance(&b) <= 1e-12 * a.values().iter().fold(1.0_f64, |m, x| m.max(*x)));
    }

    #[test]
    fn symmetric_densities_stay_exactly_symmetric(
        spec in mixture(),
        eps in 0.1..1.0_f64,
        f in interaction(),
    ) {
        let v = quartic();
        let grid = Grid::for_potential(&v, eps, 201).unwrap();
        let u = spec.sample(&grid).unwrap().symmetrize();
        let cfg = SolverConfig::new(eps, cfl_dt(&u, &v, &f, eps), 1.0).unwrap();
        let mut a = u;
        for _ in 0..20 {
            a = pde::step(&a, &cfg, &v, &f).unwrap();
            prop_assert!(a.is_symmetric(0.0));
            prop_assert_eq!(a.moments(5).max_odd_abs(), 0.0);
        }
    }
}
