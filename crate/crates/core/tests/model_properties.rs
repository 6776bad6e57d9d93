use nagqn::model::{
    mlp_gradient_check, softmax, Activation, LossKind, MiniBatch, MlpObjective, MlpSpec, StochasticObjective,
    Targets,
};
use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_spec(rng: &mut ChaCha8Rng, activation: Activation, loss: LossKind) -> MlpSpec {
    let depth = rng.random_range(2..=4);
    let layers = (0..depth).map(|_| rng.random_range(1..=8)).collect();
    MlpSpec::new(layers, activation, loss).unwrap()
}

#[test]
fn backprop_matches_finite_differences_on_200_random_mlps() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for trial in 0..200u64 {
        let activation = if trial % 2 == 0 { Activation::Relu } else { Activation::Sigmoid };
        let loss = if trial % 4 < 2 { LossKind::SoftmaxCrossEntropy } else { LossKind::MeanSquaredError };
        let spec = random_spec(&mut rng, activation, loss);
        let b = rng.random_range(1..=4);
        let err = mlp_gradient_check(&spec, b, trial).unwrap();
        assert!(err <= 1e-5, "trial {trial} {:?}: {err:e}", spec.layer_sizes());
        worst = worst.max(err);
    }
    assert!(worst <= 1e-5);
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(rows in 1usize..6, cols in 1usize..12, seed in any::<u64>(), scale in 0.0f64..800.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let logits = Array2::from_shape_fn((rows, cols), |_| scale * (rng.random::<f64>() - 0.5));
        let p = softmax(logits.view());
        for row in p.axis_iter(Axis(0)) {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn loss_is_invariant_under_sample_permutation(seed in any::<u64>(), mse in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (act, loss) = if mse { (Activation::Sigmoid, LossKind::MeanSquaredError) } else { (Activation::Relu, LossKind::SoftmaxCrossEntropy) };
        let spec = random_spec(&mut rng, act, loss);
        let b = rng.random_range(1..=16);
        let inputs = Array2::from_shape_fn((b, spec.input_width()), |_| rng.random::<f64>() * 2.0 - 1.0);
        let targets = if mse {
            Targets::Values(Array2::from_shape_fn((b, spec.output_width()), |_| rng.random::<f64>()))
        } else {
            Targets::Classes((0..b).map(|_| rng.random_range(0..spec.output_width())).collect())
        };
        let w = Array1::from_shape_fn(spec.param_count(), |_| rng.random::<f64>() - 0.5);
        let mut perm: Vec<usize> = (0..b).collect();
        perm.shuffle(&mut rng);
        let obj = MlpObjective::new(spec);
        let a = MiniBatch::new(inputs.clone(), targets.clone()).unwrap();
        let p = MiniBatch::new(inputs.select(Axis(0), &perm), targets.select(&perm)).unwrap();
        let (la, ga) = obj.evaluate(w.view(), &a).unwrap();
        let (lp, gp) = obj.evaluate(w.view(), &p).unwrap();
        prop_assert!((la - lp).abs() <= 1e-12 * la.abs().max(1.0));
        for (x, y) in ga.iter().zip(gp.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn pack_unpack_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, Activation::Relu, LossKind::SoftmaxCrossEntropy);
        let w = Array1::from_shape_fn(spec.param_count(), |_| rng.random::<f64>());
        let layout = spec.layout();
        let parts = layout.unpack(w.view()).unwrap();
        prop_assert_eq!(layout.pack(&parts).unwrap(), w);
    }
}
