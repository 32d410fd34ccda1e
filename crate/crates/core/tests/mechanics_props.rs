use dhj_core::mechanics::{
    del_step, free_particle, hamiltonian_from_lagrangian, kinetic_minus_potential, left_right_relation_residual,
    legendre_left, legendre_right, partial_consistency_gap, run_trajectory, step_left, step_right,
    symplecticity_defect, verify_step, FnLagrangian, Side,
};
use dhj_core::numeric::{newton_solve, scalar, NewtonConfig, PhasePoint};
use dhj_core::optctrl::{discretize_right, reduce, sakamoto1d};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg() -> NewtonConfig {
    NewtonConfig::default()
}

/// Rectangle-rule Lagrangian with potential `k q^2 / 2 + c q^4 / 4`. The
/// Legendre transform stays invertible on the sampled box for `h <= 0.3`.
fn anharmonic(h: f64, k: f64, c: f64) -> FnLagrangian {
    kinetic_minus_potential(
        1,
        h,
        move |q| k * q[0] * q[0] / 2.0 + c * q[0].powi(4) / 4.0,
        move |q| scalar(k * q[0] + c * q[0].powi(3)),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn legendre_hamiltonian_is_symplectic(
        h in 0.05f64..0.3, k in 0.1f64..3.0, c in 0.0f64..0.5,
        q in -1.0f64..1.0, p in -1.0f64..1.0,
    ) {
        let hp = hamiltonian_from_lagrangian(anharmonic(h, k, c), Side::Right);
        let x = PhasePoint::scalar(1, q, p).unwrap();
        let d = symplecticity_defect(&hp, &x, 1e-6, &cfg()).unwrap();
        prop_assert!(d < 1e-5, "defect {d}");
    }

    #[test]
    fn control_model_is_symplectic(q in -0.5f64..0.5, p in -1.0f64..1.0) {
        let hp = discretize_right(reduce(sakamoto1d(1.0, 1.0).unwrap()));
        let x = PhasePoint::scalar(1, q, p).unwrap();
        let d = symplecticity_defect(&hp, &x, 1e-6, &cfg()).unwrap();
        prop_assert!(d < 1e-5, "defect {d}");
    }

    #[test]
    fn steps_verify(
        h in 0.05f64..0.3, k in 0.1f64..3.0,
        q in -1.0f64..1.0, p in -1.0f64..1.0,
    ) {
        let l = anharmonic(h, k, 0.2);
        let x = PhasePoint::scalar(1, q, p).unwrap();
        let hp = hamiltonian_from_lagrangian(l.clone(), Side::Right);
        let y = step_right(&hp, &x, &cfg()).unwrap();
        prop_assert!(verify_step(&hp, &x, &y).unwrap() <= cfg().tol);
        let hm = hamiltonian_from_lagrangian(l, Side::Left);
        let y = step_left(&hm, &x, &cfg()).unwrap();
        prop_assert!(verify_step(&hm, &x, &y).unwrap() <= cfg().tol);
    }

    #[test]
    fn right_step_matches_del(
        h in 0.05f64..0.3, k in 0.1f64..3.0, c in 0.0f64..0.5,
        q0 in -1.0f64..1.0, q1 in -1.0f64..1.0,
    ) {
        let l = anharmonic(h, k, c);
        let (q0, q1) = (scalar(q0), scalar(q1));
        let q2 = del_step(&l, &q0, &q1, &cfg(), None).unwrap();
        let x1 = legendre_right(&l, 1, &q0, &q1).unwrap();
        let hp = hamiltonian_from_lagrangian(l, Side::Right);
        let x2 = step_right(&hp, &x1, &cfg()).unwrap();
        prop_assert!((x2.q[0] - q2[0]).abs() <= 1e-9, "{} vs {}", x2.q[0], q2[0]);
    }

    #[test]
    fn momentum_matches_along_del(
        h in 0.05f64..0.3, k in 0.1f64..3.0, c in 0.0f64..0.5,
        q0 in -1.0f64..1.0, q1 in -1.0f64..1.0,
    ) {
        let l = anharmonic(h, k, c);
        let mut qs = vec![scalar(q0), scalar(q1)];
        for _ in 0..10 {
            let n = qs.len();
            let next = del_step(&l, &qs[n - 2], &qs[n - 1], &cfg(), None).unwrap();
            qs.push(next);
        }
        for j in 1..qs.len() - 1 {
            let plus = legendre_right(&l, j, &qs[j - 1], &qs[j]).unwrap();
            let minus = legendre_left(&l, j + 1, &qs[j], &qs[j + 1]).unwrap();
            prop_assert!((plus.p[0] - minus.p[0]).abs() <= 1e-9);
        }
    }
}

#[test]
fn left_right_relation_on_random_quadratic_lagrangians() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let (h, k) = (rng.gen_range(0.05..0.3), rng.gen_range(0.1..3.0));
        let l = anharmonic(h, k, 0.0);
        let hp = hamiltonian_from_lagrangian(l.clone(), Side::Right);
        let hm = hamiltonian_from_lagrangian(l, Side::Left);
        let x = PhasePoint::scalar(1, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).unwrap();
        let y = step_right(&hp, &x, &cfg()).unwrap();
        let r = left_right_relation_residual(&hp, &hm, &x.q, &x.p, &y.q, &y.p).unwrap();
        assert!(r < 1e-9, "residual {r}");
    }
}

#[test]
fn free_particle_relation_over_fifty_steps() {
    let l = free_particle(1, 1.0);
    let hp = hamiltonian_from_lagrangian(l.clone(), Side::Right);
    let hm = hamiltonian_from_lagrangian(l, Side::Left);
    let traj = run_trajectory(&hp, &PhasePoint::scalar(1, 0.3, 0.7).unwrap(), 50, &cfg()).unwrap();
    assert!(!traj.is_truncated());
    for w in traj.points.windows(2) {
        let r = left_right_relation_residual(&hp, &hm, &w[0].q, &w[0].p, &w[1].q, &w[1].p).unwrap();
        assert!(r < 1e-9);
    }
}

#[test]
fn analytic_partials_agree_with_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples: Vec<_> = (0..100)
        .map(|_| (scalar(rng.gen_range(-2.0..2.0)), scalar(rng.gen_range(-2.0..2.0))))
        .collect();
    let control = discretize_right(reduce(sakamoto1d(1.0, 1.0).unwrap()));
    assert!(partial_consistency_gap(&control, &samples).unwrap() < 1e-6);
    let legendre = hamiltonian_from_lagrangian(anharmonic(0.2, 1.0, 0.3), Side::Right);
    assert!(partial_consistency_gap(&legendre, &samples).unwrap() < 1e-6);
}

proptest! {
    #[test]
    fn newton_is_idempotent(root in -3.0f64..3.0, shift in 0.5f64..2.0) {
        // x^3 + shift x - c has one real root
        let c = root.powi(3) + shift * root;
        let f = move |x: &dhj_core::RealVec| Ok(scalar(x[0].powi(3) + shift * x[0] - c));
        let first = newton_solve(f, &scalar(0.0), &cfg()).unwrap();
        let again = newton_solve(f, &first.x, &cfg()).unwrap();
        prop_assert!(again.iterations <= 2);
        prop_assert!((first.x[0] - root).abs() < 1e-10);
    }
}

#[test]
fn runs_are_deterministic() {
    let hp = discretize_right(reduce(sakamoto1d(1.0, 1.0).unwrap()));
    let start = PhasePoint::scalar(1, 5e-8, 0.0).unwrap();
    let a = run_trajectory(&hp, &start, 18, &cfg()).unwrap();
    let b = run_trajectory(&hp, &start, 18, &cfg()).unwrap();
    let bits = |t: &dhj_core::mechanics::DiscreteTrajectory| {
        t.points.iter().map(|x| (x.q[0].to_bits(), x.p[0].to_bits())).collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
}
