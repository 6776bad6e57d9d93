//! Stochastic quasi-Newton training with Nesterov's accelerated gradient.
//!
//! The crate provides:
//!
//! - [`model`]: the [`StochasticObjective`](model::StochasticObjective) contract,
//!   a from-scratch multilayer perceptron, synthetic test functions and a
//!   central finite-difference gradient oracle.
//! - [`qn`]: online quasi-Newton steppers. Full memory (oBFGS, oNAQ) keeps a
//!   dense inverse Hessian; limited memory (oLBFGS, oLNAQ) keeps the last `m`
//!   curvature pairs and uses the two-loop recursion.
//! - [`baselines`]: step-size schedules, SGD and Adam.
//! - [`data`]: dataset loaders (UCI digits CSV, IDX, delimited regression
//!   CSV), splitting, z-normalization and seeded minibatch sampling.
//! - [`bench`]: run configuration, the experiment runner, CSV logs and
//!   run comparison.

pub mod baselines;
pub mod bench;
pub mod data;
pub mod linalg;
pub mod model;
pub mod qn;

pub use baselines::{AdamState, Schedule};
pub use model::{MiniBatch, StochasticObjective, Targets};
pub use qn::{QnConfig, StepError, StepReport};

/// Flat vector of all trainable parameters.
pub type ParamVector = ndarray::Array1<f64>;
