use proptest::prelude::*;

use regretlab::baselines::kt_run;
use regretlab::bounds::{lower_bound, upper_bound, BoundQuery};
use regretlab::mixture::{init_posterior, mixture_predict, posterior_update};
use regretlab::logistic::sigmoid;
use regretlab::{build_grid, project, Label, LabeledExample, Norm, NormConstraint, ParamVector, PriorSpec};

fn norm() -> impl Strategy<Value = Norm> {
    prop_oneof![Just(Norm::L1), Just(Norm::L2), Just(Norm::Linf)]
}

fn label() -> impl Strategy<Value = Label> {
    prop_oneof![Just(Label::Pos), Just(Label::Neg)]
}

proptest! {
    #[test]
    fn projection_is_feasible_and_idempotent(
        v in prop::collection::vec(-20.0f64..20.0, 1..6),
        n in norm(),
        b in 0.1f64..5.0,
    ) {
        let c = NormConstraint::new(n, b).unwrap();
        let p = project(&ParamVector::new(v).unwrap(), &c);
        prop_assert!(c.contains(p.as_slice()));
        let again = project(&p, &c);
        for (a, b) in p.as_slice().iter().zip(again.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn projection_is_no_farther_than_a_grid_point(
        v in prop::collection::vec(-5.0f64..5.0, 2..3),
        n in norm(),
    ) {
        let c = NormConstraint::new(n, 1.0).unwrap();
        let p = project(&ParamVector::new(v.clone()).unwrap(), &c);
        let dist = |q: &[f64]| q.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let grid = build_grid(2, &c, 0.1).unwrap();
        for q in grid.points().filter(|q| c.contains(q)) {
            prop_assert!(dist(p.as_slice()) <= dist(q) + 1e-12);
        }
    }

    #[test]
    fn posterior_stays_normalized_and_prediction_stays_in_range(
        xs in prop::collection::vec((prop::collection::vec(-1.0f64..1.0, 2), label()), 1..30),
        n in norm(),
    ) {
        let c = NormConstraint::new(n, 2.0).unwrap();
        let grid = build_grid(2, &c, 0.5).unwrap();
        let mut post = init_posterior(&grid, &PriorSpec::uniform()).unwrap();
        for (x, y) in xs {
            let probs = grid.points().map(|q| sigmoid(q[0] * x[0] + q[1] * x[1]));
            let (lo, hi) = probs.fold((1.0f64, 0.0f64), |(lo, hi), p| (lo.min(p), hi.max(p)));
            let p = mixture_predict(&post, &grid, &x).unwrap();
            prop_assert!(lo <= p && p <= hi);
            post = posterior_update(&post, &grid, &LabeledExample::new(x, y).unwrap()).unwrap();
            prop_assert!(post.log_normalizer().abs() <= 1e-12);
        }
    }

    #[test]
    fn kt_regret_is_exchangeable(mut labels in prop::collection::vec(label(), 1..60), seed in any::<u64>()) {
        let a = kt_run(&labels).final_regret();
        // Deterministic shuffle from the seed.
        let mut s = seed | 1;
        for i in (1..labels.len()).rev() {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            labels.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let b = kt_run(&labels).final_regret();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn composed_bounds_are_monotone_in_horizon(
        d in 1usize..40,
        n in norm(),
        b in 0.25f64..8.0,
        t in 4.0f64..1e6,
    ) {
        let q = |t: f64| BoundQuery::new(n, d, t, b).unwrap();
        let (l1, l2) = (lower_bound(&q(t)).unwrap(), lower_bound(&q(2.0 * t)).unwrap());
        let (u1, u2) = (upper_bound(&q(t)).unwrap(), upper_bound(&q(2.0 * t)).unwrap());
        prop_assert!(l1.nats <= l2.nats + 1e-9);
        prop_assert!(u1.nats <= u2.nats + 1e-9);
    }
}
