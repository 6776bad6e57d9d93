//! Objectives: the stochastic objective contract and its implementations.

mod batch;
mod gradcheck;
mod mlp;
mod synthetic;

pub use batch::{MiniBatch, Targets};
pub use gradcheck::{finite_diff_grad, mlp_gradient_check, relative_error, CountingObjective};
pub use mlp::{parse_layer_sizes, softmax, Activation, LayerSlot, LossKind, MlpObjective, MlpParamLayout, MlpSpec};
pub use synthetic::{QuadraticObjective, RosenbrockObjective};

use ndarray::{Array1, ArrayView1};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("batch input width {got} does not match model input width {expected}")]
    InputWidthMismatch { expected: usize, got: usize },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,
}

/// A differentiable objective evaluated on a batch of data.
///
/// `evaluate` must be pure: the same `(w, batch)` always yields bit-identical
/// `(loss, grad)`, and `grad.len() == self.dim()`.
pub trait StochasticObjective {
    /// Data the objective is evaluated on. Synthetic objectives use `()`.
    type Batch: ?Sized;

    fn dim(&self) -> usize;

    fn evaluate(
        &self,
        w: ArrayView1<f64>,
        batch: &Self::Batch,
    ) -> Result<(f64, Array1<f64>), ModelError>;

    /// Loss only. Implementations may override this with a cheaper forward pass.
    fn loss(&self, w: ArrayView1<f64>, batch: &Self::Batch) -> Result<f64, ModelError> {
        self.evaluate(w, batch).map(|(loss, _)| loss)
    }
}

impl<T: StochasticObjective + ?Sized> StochasticObjective for &T {
    type Batch = T::Batch;

    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn evaluate(
        &self,
        w: ArrayView1<f64>,
        batch: &Self::Batch,
    ) -> Result<(f64, Array1<f64>), ModelError> {
        (**self).evaluate(w, batch)
    }

    fn loss(&self, w: ArrayView1<f64>, batch: &Self::Batch) -> Result<f64, ModelError> {
        (**self).loss(w, batch)
    }
}

pub(crate) fn check_dim(expected: usize, w: ArrayView1<f64>) -> Result<(), ModelError> {
    if w.len() != expected {
        return Err(ModelError::DimensionMismatch { expected, got: w.len() });
    }
    Ok(())
}
