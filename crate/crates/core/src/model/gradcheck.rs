//! Central finite differences and evaluation counting.

use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{LossKind, MiniBatch, MlpObjective, MlpSpec, ModelError, StochasticObjective, Targets};

/// Component `i` is `(E(w + h·eᵢ) − E(w − h·eᵢ)) / 2h` on the fixed batch.
pub fn finite_diff_grad<O: StochasticObjective + ?Sized>(
    obj: &O,
    w: ArrayView1<f64>,
    batch: &O::Batch,
    h: f64,
) -> Result<Array1<f64>, ModelError> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = w.to_owned();
    let mut grad = Array1::zeros(w.len());
    for i in 0..w.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = obj.loss(probe.view(), batch)?;
        probe[i] = orig - h;
        let minus = obj.loss(probe.view(), batch)?;
        probe[i] = orig;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂)`, zero when both vectors are zero.
pub fn relative_error(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let diff = (&a - &b).mapv(|x| x * x).sum().sqrt();
    let scale = a.dot(&a).sqrt().max(b.dot(&b).sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Backprop against central differences (`h = 1e-6`) for `spec` at random
/// normal parameters and a random batch of `batch_size` samples. Returns the
/// relative error.
pub fn mlp_gradient_check(spec: &MlpSpec, batch_size: usize, seed: u64) -> Result<f64, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fn normal(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    }
    let (n_in, n_out) = (spec.input_width(), spec.output_width());
    let w = Array1::from_shape_fn(spec.param_count(), |_| normal(&mut rng, 0.5));
    let inputs = Array2::from_shape_fn((batch_size, n_in), |_| normal(&mut rng, 1.0));
    let targets = match spec.loss() {
        LossKind::MeanSquaredError => Targets::Values(Array2::from_shape_fn((batch_size, n_out), |_| normal(&mut rng, 1.0))),
        LossKind::SoftmaxCrossEntropy => Targets::Classes((0..batch_size).map(|_| rng.random_range(0..n_out)).collect()),
    };
    let batch = MiniBatch::new(inputs, targets)?;
    let obj = MlpObjective::new(spec.clone());
    let (_, grad) = obj.evaluate(w.view(), &batch)?;
    let fd = finite_diff_grad(&obj, w.view(), &batch, 1e-6)?;
    Ok(relative_error(grad.view(), fd.view()))
}

/// Wraps an objective and counts `evaluate` calls (gradient evaluations).
/// Loss-only calls are not counted.
#[derive(Debug)]
pub struct CountingObjective<O> {
    inner: O,
    grad_evals: AtomicUsize,
}

impl<O> CountingObjective<O> {
    pub fn new(inner: O) -> Self {
        Self { inner, grad_evals: AtomicUsize::new(0) }
    }

    pub fn grad_evals(&self) -> usize {
        self.grad_evals.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: StochasticObjective> StochasticObjective for CountingObjective<O> {
    type Batch = O::Batch;

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(
        &self,
        w: ArrayView1<f64>,
        batch: &Self::Batch,
    ) -> Result<(f64, Array1<f64>), ModelError> {
        self.grad_evals.fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(w, batch)
    }

    fn loss(&self, w: ArrayView1<f64>, batch: &Self::Batch) -> Result<f64, ModelError> {
        self.inner.loss(w, batch)
    }
}
