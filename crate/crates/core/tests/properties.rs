use h2reduce::linalg::{self, skew, Mat};
use h2reduce::lti::{transfer_eval, StateSpace};
use h2reduce::manifold::{exp_map, inner, random_tangent, ManifoldPoint};
use h2reduce::objective::{build_data_from_state_space, eval_f, eval_f_dual};
use h2reduce::structured::to_structured;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn random_stable(rng: &mut ChaCha8Rng, n: usize, margin: f64) -> Mat {
    let m = random_mat(rng, n, n);
    let shift = linalg::max_real_eigenvalue(&m).unwrap() + margin;
    m - Mat::identity(n, n) * shift
}

fn random_point(rng: &mut ChaCha8Rng, r: usize, m: usize, p: usize) -> ManifoldPoint {
    let g = random_mat(rng, r, r);
    ManifoldPoint::new(
        skew(&random_mat(rng, r, r)),
        &g * g.transpose() + Mat::identity(r, r) * 0.1,
        random_mat(rng, r, m),
        random_mat(rng, p, r),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lyapunov_residual_is_small(seed in any::<u64>(), n in 1usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_stable(&mut rng, n, 0.1);
        let w = random_mat(&mut rng, n, n);
        let w = &w * w.transpose();
        let x = linalg::solve_lyapunov_primal(&a, &w).unwrap();
        let res = &a * &x + &x * a.transpose() + &w;
        prop_assert!(res.amax() <= 1e-9 * (1.0 + x.amax()) * (1.0 + a.amax()));
        prop_assert_eq!(&x, &x.transpose());
    }

    #[test]
    fn sylvester_residual_is_small(seed in any::<u64>(), n in 1usize..=8, m in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_stable(&mut rng, n, 0.1);
        let b = random_stable(&mut rng, m, 0.1);
        let w = random_mat(&mut rng, n, m);
        let x = linalg::solve_sylvester(&a, &b, &w).unwrap();
        let res = &a * &x + &x * &b + &w;
        prop_assert!(res.amax() <= 1e-9 * (1.0 + x.amax()) * (1.0 + a.amax() + b.amax()));
    }

    #[test]
    fn structured_form_keeps_transfer(seed in any::<u64>(), n in 1usize..=8, w in 1e-3f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = StateSpace::new(random_stable(&mut rng, n, 0.3), random_mat(&mut rng, n, 2), random_mat(&mut rng, 1, n)).unwrap();
        let (s, _) = to_structured(&sys).unwrap();
        prop_assert!(linalg::is_spd(&s.rt));
        let g = transfer_eval(&sys, w).unwrap();
        let gs = transfer_eval(&s.to_state_space().unwrap(), w).unwrap();
        prop_assert!((&g - &gs).norm() <= 1e-8 * (1.0 + g.norm()));
    }

    #[test]
    fn exp_map_stays_on_manifold(seed in any::<u64>(), r in 1usize..=5, t in -20.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_point(&mut rng, r, 2, 1);
        let q = exp_map(&p, &random_tangent(&p, seed).scale(t)).unwrap();
        prop_assert!(linalg::is_spd(q.r()));
        prop_assert!((q.j() + q.j().transpose()).amax() == 0.0);
        prop_assert!(linalg::is_stable(&q.state_matrix(), 0.0));
    }

    #[test]
    fn metric_is_positive(seed in any::<u64>(), r in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_point(&mut rng, r, 1, 2);
        let u = random_tangent(&p, seed);
        let v = random_tangent(&p, seed ^ 0x5555);
        prop_assert!(inner(&p, &u, &u) > 0.0);
        prop_assert!((inner(&p, &u, &v) - inner(&p, &v, &u)).abs() <= 1e-12);
    }

    #[test]
    fn objective_forms_agree(seed in any::<u64>(), n in 2usize..=8, r in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = StateSpace::new(random_stable(&mut rng, n, 0.3), random_mat(&mut rng, n, 1), random_mat(&mut rng, 2, n)).unwrap();
        let data = build_data_from_state_space(&sys).unwrap();
        let p = random_point(&mut rng, r, 1, 2);
        let (f, ws) = eval_f(&data, &p).unwrap();
        prop_assert!(f >= 0.0);
        prop_assert!((f - eval_f_dual(&data, &p, &ws)).abs() <= 1e-8 * (1.0 + data.const_term()));
    }
}
