use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robustkit::learners::{be_the_leader_residual, ExactBallMaximizer, FplState, OgdState};
use robustkit::linalg::unvectorize;
use robustkit::oracles::generate::{feasible, infeasible, GeneratorConfig};
use robustkit::oracles::{in_psd_ball, project_psd_ball, quad_form_coefficients, Family, Instance};
use robustkit::robust::{average_iterates, convexity_violation, decomposition_consistency_gap, RobustProblem};
use robustkit::trustregion::{trs_max_on_ball, TrsProblem};
use robustkit::uncertainty::{sample_ball, BallSet, UncertaintySet};
use robustkit::verify::{certify, check_epsilon_robust};

fn vector(k: usize) -> impl Strategy<Value = DVector<f64>> {
    proptest::collection::vec(-3.0f64..3.0, k).prop_map(DVector::from_vec)
}

fn config(n: usize, m: usize, k: usize, sigma: f64, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        n,
        m,
        k,
        sigma,
        margin: 0.05,
        seed,
    }
}

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Lp), Just(Family::Qp), Just(Family::Sdp)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ogd_iterates_stay_in_ball(grads in proptest::collection::vec(vector(3), 1..30), eta in 0.01f64..5.0) {
        let set = BallSet::unit(3).unwrap();
        let mut state = OgdState::new(DVector::zeros(3), eta).unwrap();
        for g in &grads {
            state = state.step(g, &set).unwrap();
            prop_assert!(set.contains(state.point()));
        }
    }

    #[test]
    fn fpl_sum_matches_recomputation(rewards in proptest::collection::vec(vector(4), 1..40), seed in any::<u64>()) {
        let mut state = FplState::seeded(4, 0.5, seed, 0).unwrap();
        for f in &rewards {
            state = state.accumulate(f).unwrap();
        }
        let direct = rewards.iter().fold(DVector::zeros(4), |acc, f| acc + f);
        prop_assert!((state.cumulative() - direct).norm() <= 1e-9);
    }

    #[test]
    fn be_the_leader_is_nonnegative(rewards in proptest::collection::vec(vector(3), 1..50)) {
        let oracle = ExactBallMaximizer(BallSet::unit(3).unwrap());
        prop_assert!(be_the_leader_residual(&rewards, &oracle).unwrap() >= -1e-9);
    }

    #[test]
    fn averaging_stays_in_ball(seed in any::<u64>(), count in 1usize..50) {
        let set = BallSet::unit(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<DVector<f64>> = (0..count).map(|_| sample_ball(&set, &mut rng)).collect();
        prop_assert!(set.contains(&average_iterates(&points).unwrap()));
    }

    #[test]
    fn quad_form_identity_and_bounds(seed in any::<u64>(), sigma in 0.0f64..2.0) {
        let Instance::Qp(inst) = feasible(Family::Qp, &config(4, 3, 3, sigma, seed)).unwrap() else { unreachable!() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let x = sample_ball(&BallSet::unit(4).unwrap(), &mut rng);
        let u = sample_ball(&BallSet::unit(3).unwrap(), &mut rng);
        for i in 0..3 {
            let qf = quad_form_coefficients(&inst, i, &x);
            let direct = inst.evaluate(i, &x, &u);
            prop_assert!((qf.evaluate(&u) - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
            prop_assert!(qf.q.norm() <= inst.sigma().powi(2) + 1e-12);
            prop_assert!(qf.r.norm() <= inst.sigma() * inst.rho() + 1e-12);
        }
    }

    #[test]
    fn decompositions_are_consistent_and_convex(fam in family(), seed in any::<u64>()) {
        let inst = feasible(fam, &config(3, 3, 2, 0.5, seed)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(decomposition_consistency_gap(inst.problem(), 20, &mut rng).unwrap() <= 1e-9);
        prop_assert!(convexity_violation(inst.problem(), 20, &mut rng).unwrap() <= 1e-9);
    }

    #[test]
    fn planted_points_have_their_margin(fam in family(), seed in any::<u64>()) {
        let inst = feasible(fam, &config(4, 4, 3, 0.7, seed)).unwrap();
        let point = DVector::from_vec(inst.ground_truth().unwrap().point.clone().unwrap());
        prop_assert!(inst.problem().in_domain(&point));
        let cert = certify(&inst, &point, 1e-6).unwrap();
        for v in &cert.violations {
            prop_assert!((v + 0.05).abs() <= 1e-6, "violation {v}");
        }
        prop_assert!(check_epsilon_robust(&cert, 0.0).unwrap().passed);
    }

    #[test]
    fn infeasible_instances_have_no_robust_point(fam in family(), seed in any::<u64>()) {
        let inst = infeasible(fam, &config(3, 3, 2, 0.5, seed)).unwrap();
        let decision = inst.problem().decision_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ball = BallSet::new(decision, inst.problem().decision_radius()).unwrap();
        for _ in 0..20 {
            let x = sample_ball(&ball, &mut rng);
            let x = match &inst {
                Instance::Sdp(s) => {
                    let side = s.side();
                    robustkit::linalg::vectorize(&project_psd_ball(&unvectorize(&x, side)))
                }
                _ => x,
            };
            let cert = certify(&inst, &x, 1e-6).unwrap();
            prop_assert!(!check_epsilon_robust(&cert, 0.0).unwrap().passed);
        }
    }

    #[test]
    fn psd_projection_is_nearest(entries in proptest::collection::vec(-2.0f64..2.0, 9), seed in any::<u64>()) {
        let x = DMatrix::from_vec(3, 3, entries);
        let x = (&x + x.transpose()) * 0.5;
        let p = project_psd_ball(&x);
        prop_assert!(in_psd_ball(&robustkit::linalg::vectorize(&p), 3));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gauss = BallSet::unit(9).unwrap();
        for _ in 0..50 {
            let g = unvectorize(&sample_ball(&gauss, &mut rng), 3);
            let w = project_psd_ball(&(&g * g.transpose()));
            prop_assert!((&x - &p).norm() <= (&x - &w).norm() + 1e-9);
        }
    }

    #[test]
    fn trs_dominates_probes(q in proptest::collection::vec(-2.0f64..2.0, 16), r in vector(4), seed in any::<u64>()) {
        let q = DMatrix::from_vec(4, 4, q);
        let q = (&q + q.transpose()) * 0.5;
        let problem = TrsProblem::new(q, r, 1e-9).unwrap();
        let sol = trs_max_on_ball(&problem).unwrap();
        prop_assert!(sol.point.norm() <= 1.0 + 1e-9);
        prop_assert!(sol.dual_bound >= sol.value - 1e-12);
        let set = BallSet::unit(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let u = sample_ball(&set, &mut rng);
            prop_assert!(sol.value + 1e-9 >= problem.objective(&u));
        }
    }
}
