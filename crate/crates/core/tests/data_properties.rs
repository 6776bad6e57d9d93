use nagqn::data::{
    load_casp, load_digits_csv, load_idx_mnist, split_train_test, write_csv_regression, write_digits_csv,
    write_idx_mnist, z_normalize, BatchSampler, Dataset, TaskKind,
};
use nagqn::model::Targets;
use ndarray::{Array2, Axis};
use proptest::prelude::*;

fn regression(features: Array2<f64>) -> Dataset {
    let n = features.nrows();
    let t = Array2::from_shape_fn((n, 1), |(i, _)| i as f64 * 0.5 - 3.0);
    Dataset::new(features, Targets::Values(t), TaskKind::Regression).unwrap()
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-1e3f64..1e3, rows * cols)
        .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

proptest! {
    #[test]
    fn epochs_partition_the_rows(n in 1usize..300, b in 1usize..80, seed in any::<u64>()) {
        let ds = regression(Array2::zeros((n, 1)));
        let mut sampler = BatchSampler::new(&ds, b, seed);
        for epoch in 0..3u64 {
            let mut seen = Vec::new();
            for _ in 0..sampler.batches_per_epoch() {
                let idx = sampler.next_indices();
                prop_assert!(!idx.is_empty() && idx.len() <= b);
                seen.extend_from_slice(idx);
            }
            prop_assert_eq!(&seen, &BatchSampler::permutation(n, seed, epoch));
            seen.sort();
            prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn znorm_is_standardizing_and_idempotent((rows, cols) in (2usize..40, 1usize..6), seed in any::<u64>()) {
        let f = Array2::from_shape_fn((rows, cols), |(i, j)| {
            let x = ((i * 7919 + j * 104729) as u64 ^ seed) % 1000;
            if j == 0 { 5.0 } else { x as f64 / 10.0 }
        });
        let ds = regression(f);
        let (once, _, stats) = z_normalize(&ds, &ds);
        prop_assert!(stats.std.iter().all(|&s| s >= 0.0));
        for (j, col) in once.features().axis_iter(Axis(1)).enumerate() {
            let mean = col.sum() / rows as f64;
            let var = col.mapv(|x| (x - mean).powi(2)).sum() / rows as f64;
            prop_assert!(mean.abs() <= 1e-10);
            if stats.std[j] > 0.0 {
                prop_assert!((var.sqrt() - 1.0).abs() <= 1e-10);
            } else {
                prop_assert!(col.iter().all(|&x| x == 0.0));
            }
        }
        let (twice, _, _) = z_normalize(&once, &once);
        for (a, b) in once.features().iter().zip(twice.features()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn regression_csv_round_trip(f in (1usize..20, 1usize..6).prop_flat_map(|(r, c)| matrix(r, c)), target_at in 0usize..6) {
        let ds = regression(f);
        let names: Vec<String> = (0..ds.num_features()).map(|j| format!("F{j}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let at = target_at.min(names.len());
        let file = tempfile::NamedTempFile::new().unwrap();
        write_csv_regression(&ds, file.path(), b',', &names, "RMSD", at).unwrap();
        prop_assert_eq!(load_casp(file.path()).unwrap(), ds);
    }

    #[test]
    fn digits_round_trip(pixels in prop::collection::vec(0u8..=16, 64 * 3), labels in prop::collection::vec(0usize..10, 3)) {
        let f = Array2::from_shape_vec((3, 64), pixels.iter().map(|&p| p as f64 / 16.0).collect()).unwrap();
        let ds = Dataset::new(f, Targets::Classes(labels), TaskKind::Classification { num_classes: 10 }).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        write_digits_csv(&ds, file.path()).unwrap();
        prop_assert_eq!(load_digits_csv(file.path()).unwrap(), ds);
    }

    #[test]
    fn idx_round_trip(pixels in prop::collection::vec(any::<u8>(), 2 * 12), labels in prop::collection::vec(0usize..10, 2)) {
        let f = Array2::from_shape_vec((2, 12), pixels.iter().map(|&p| p as f64 / 255.0).collect()).unwrap();
        let ds = Dataset::new(f, Targets::Classes(labels), TaskKind::Classification { num_classes: 10 }).unwrap();
        let (img, lab) = (tempfile::NamedTempFile::new().unwrap(), tempfile::NamedTempFile::new().unwrap());
        write_idx_mnist(&ds, img.path(), lab.path(), 3, 4).unwrap();
        prop_assert_eq!(load_idx_mnist(img.path(), lab.path()).unwrap(), ds);
    }
}

#[test]
fn vendored_digits_corpus() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/optdigits.csv");
    let ds = load_digits_csv(path).unwrap();
    assert_eq!(ds.len(), 1797);
    assert_eq!(ds.num_features(), 64);
    let (train, test) = split_train_test(&ds, 2.0 / 3.0, 0);
    assert_eq!((train.len(), test.len()), (1198, 599));
    assert!(ds.features().iter().all(|&x| (0.0..=1.0).contains(&x)));
}

#[test]
fn vendored_wine_corpus() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/winequality-red.csv");
    let ds = nagqn::data::load_wine(path).unwrap();
    assert_eq!((ds.len(), ds.num_features()), (1599, 11));
    let (train, test) = split_train_test(&ds, 0.8, 0);
    assert_eq!((train.len(), test.len()), (1279, 320));
}
