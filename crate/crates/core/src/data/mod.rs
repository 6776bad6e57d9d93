//! Datasets, file formats and minibatch sampling.

mod digits;
mod idx;
mod regression_csv;
mod sampler;

pub use digits::{load_digits_csv, write_digits_csv};
pub use idx::{load_idx_mnist, write_idx_mnist};
pub use regression_csv::{load_casp, load_csv_regression, load_wine, write_csv_regression, TargetColumn};
pub use sampler::BatchSampler;

use std::path::PathBuf;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{MiniBatch, ModelError, Targets};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: invalid data: {message}")]
    Validation { path: PathBuf, message: String },
    #[error("{path}: bad file format: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: no data rows")]
    Empty { path: PathBuf },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Classification { num_classes: usize },
    Regression,
}

/// Features plus targets; immutable once loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    targets: Targets,
    kind: TaskKind,
}

impl Dataset {
    pub fn new(features: Array2<f64>, targets: Targets, kind: TaskKind) -> Result<Self, ModelError> {
        if features.nrows() != targets.len() {
            return Err(ModelError::InvalidBatch(format!(
                "{} feature rows but {} targets",
                features.nrows(),
                targets.len()
            )));
        }
        match (&targets, kind) {
            (Targets::Classes(c), TaskKind::Classification { num_classes }) => {
                if let Some(bad) = c.iter().find(|&&c| c >= num_classes) {
                    return Err(ModelError::InvalidBatch(format!(
                        "class {bad} outside [0, {num_classes})"
                    )));
                }
            }
            (Targets::Values(_), TaskKind::Regression) => {}
            _ => return Err(ModelError::InvalidBatch("targets do not match task kind".into())),
        }
        Ok(Self { features, targets, kind })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    /// Rows in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            targets: self.targets.select(indices),
            kind: self.kind,
        }
    }

    pub fn batch(&self, indices: &[usize]) -> Result<MiniBatch, ModelError> {
        MiniBatch::new(self.features.select(Axis(0), indices), self.targets.select(indices))
    }

    /// Keeps the first `n` rows.
    pub fn truncate(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }

    fn with_features(&self, features: Array2<f64>) -> Dataset {
        Dataset { features, targets: self.targets.clone(), kind: self.kind }
    }
}

/// Seeded shuffle, then the first `round(n·train_fraction)` rows form the
/// training set and the rest the test set.
pub fn split_train_test(ds: &Dataset, train_fraction: f64, seed: u64) -> (Dataset, Dataset) {
    assert!(
        train_fraction > 0.0 && train_fraction < 1.0,
        "train fraction must lie in (0, 1)"
    );
    let n = ds.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64) * train_fraction).round() as usize;
    let n_train = n_train.min(n);
    (ds.select(&perm[..n_train]), ds.select(&perm[n_train..]))
}

/// Per-feature mean and population standard deviation of a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl NormStats {
    pub fn fit(features: &Array2<f64>) -> Self {
        let n = features.nrows().max(1) as f64;
        let mean = features.sum_axis(Axis(0)) / n;
        let centered = features - &mean;
        let var = centered.mapv(|x| x * x).sum_axis(Axis(0)) / n;
        Self { mean, std: var.mapv(f64::sqrt) }
    }

    /// `(x − mean)/std`; zero-variance columns map to 0.
    pub fn apply(&self, ds: &Dataset) -> Dataset {
        let mut f = ds.features() - &self.mean;
        for (mut col, &sd) in f.columns_mut().into_iter().zip(self.std.iter()) {
            if sd > 0.0 {
                col.mapv_inplace(|x| x / sd);
            } else {
                col.fill(0.0);
            }
        }
        ds.with_features(f)
    }
}

/// Normalizes both splits with statistics of the training split.
pub fn z_normalize(train: &Dataset, test: &Dataset) -> (Dataset, Dataset, NormStats) {
    let stats = NormStats::fit(train.features());
    (stats.apply(train), stats.apply(test), stats)
}

fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn regression(features: Array2<f64>) -> Dataset {
        let n = features.nrows();
        Dataset::new(features, Targets::Values(Array2::zeros((n, 1))), TaskKind::Regression).unwrap()
    }

    fn indexed(n: usize) -> Dataset {
        let f = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        regression(f)
    }

    #[test]
    fn split_sizes_reproduce_published_counts() {
        for (n, frac, train, test) in [(4898, 0.8, 3918, 980), (45730, 0.8, 36584, 9146), (1797, 2.0 / 3.0, 1198, 599)] {
            let (a, b) = split_train_test(&indexed(n), frac, 0);
            assert_eq!((a.len(), b.len()), (train, test));
        }
    }

    #[test]
    fn split_is_seeded_and_disjoint() {
        let ds = indexed(50);
        let (a1, b1) = split_train_test(&ds, 0.7, 3);
        let (a2, _) = split_train_test(&ds, 0.7, 3);
        let (a3, _) = split_train_test(&ds, 0.7, 4);
        assert_eq!(a1, a2);
        assert_ne!(a1, a3);
        let mut all: Vec<i64> = a1.features().iter().chain(b1.features().iter()).map(|&x| x as i64).collect();
        all.sort();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn znorm_hand_values() {
        let train = regression(array![[1.0, 7.0], [2.0, 7.0], [3.0, 7.0]]);
        let test = regression(array![[2.0, 8.0]]);
        let (tr, te, stats) = z_normalize(&train, &test);
        let z = 1.5f64.sqrt(); // 1/√(2/3)
        assert!((tr.features()[[0, 0]] + z).abs() < 1e-12);
        assert!(tr.features()[[1, 0]].abs() < 1e-12);
        assert!((tr.features()[[2, 0]] - z).abs() < 1e-12);
        assert!(tr.features().column(1).iter().all(|&x| x == 0.0));
        assert_eq!(stats.mean, array![2.0, 7.0]);
        // Test split uses the training mean and std.
        assert!(te.features()[[0, 0]].abs() < 1e-12);
        assert_eq!(te.features()[[0, 1]], 0.0);
    }

    #[test]
    fn znorm_is_idempotent() {
        let train = regression(array![[1.0, -3.0], [4.0, 0.5], [9.0, 2.0], [0.0, 0.0]]);
        let (once, _, _) = z_normalize(&train, &train);
        let (twice, _, _) = z_normalize(&once, &once);
        for (a, b) in once.features().iter().zip(twice.features().iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_out_of_range_class() {
        let r = Dataset::new(
            Array2::zeros((2, 1)),
            Targets::Classes(vec![0, 3]),
            TaskKind::Classification { num_classes: 3 },
        );
        assert!(r.is_err());
    }
}
