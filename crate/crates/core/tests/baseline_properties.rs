use nagqn::baselines::{sgd_step, AdamConfig, AdamState, Schedule};
use nagqn::linalg::norm2;
use nagqn::model::{QuadraticObjective, StochasticObjective};
use ndarray::Array1;
use proptest::prelude::*;

proptest! {
    #[test]
    fn schedules_are_positive_and_non_increasing(tau in 1e-3f64..1e3, alpha0 in 1e-4f64..10.0, k in 1u64..1_000_000) {
        for s in [Schedule::gain(tau, alpha0).unwrap(), Schedule::sqrt_decay(alpha0).unwrap(), Schedule::constant(alpha0).unwrap()] {
            let (a, b) = (s.step_size(k).unwrap(), s.step_size(k + 1).unwrap());
            prop_assert!(a > 0.0 && b > 0.0);
            prop_assert!(b <= a);
        }
    }

    #[test]
    fn adam_step_is_bounded(grads in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 4), 1..30), alpha in 1e-5f64..1.0) {
        let mut state = AdamState::new(4, AdamConfig { alpha, ..Default::default() });
        let mut w = Array1::zeros(4);
        for g in grads {
            let before = w.clone();
            state.step(&mut w, Array1::from(g).view());
            for (a, b) in w.iter().zip(before.iter()) {
                prop_assert!((a - b).abs() <= 2.0 * alpha);
            }
        }
    }

    #[test]
    fn sgd_below_stability_limit_decreases_gradient(seed in 0u64..10_000, d in 1usize..=10, cond in 1.0f64..50.0, frac in 0.05f64..0.99) {
        let obj = QuadraticObjective::random(d, cond, seed).unwrap();
        // Largest eigenvalue is `cond` by construction.
        let alpha = frac * 2.0 / cond;
        let mut w = Array1::from_elem(d, 3.0);
        let mut prev = f64::INFINITY;
        for _ in 0..50 {
            let (_, g) = obj.evaluate(w.view(), &()).unwrap();
            let n = norm2(g.view());
            if n < 1e-10 {
                break;
            }
            prop_assert!(n <= prev * (1.0 + 1e-12));
            prev = n;
            w = sgd_step(w.view(), g.view(), alpha);
        }
    }
}
