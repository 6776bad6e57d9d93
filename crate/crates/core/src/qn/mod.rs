//! Online quasi-Newton steppers.
//!
//! All four methods share one iteration. At the look-ahead point
//! `u = w + μv` (with `μ = 0` for the BFGS family):
//!
//! 1. `∇E₁ = ∇E(u, X_k)`
//! 2. `g = −H ∇E₁`, normalized to unit length
//! 3. `v ← μv + α_k g`, `w ← w + v`
//! 4. `∇E₂ = ∇E(w, X_k)` on the same minibatch
//! 5. curvature pair `p = w − u`, `q = ∇E₂ − ∇E₁ + λp`
//! 6. `H` absorbs `(p, q)` when `qᵀp` passes the curvature guard
//!
//! `H` is either a dense matrix ([`dense`]) or the implicit two-loop
//! representation over the last `m` pairs ([`limited`]).

pub mod dense;
pub mod limited;

pub use dense::{obfgs_step, onaq_step, DenseInverseHessian, DenseQnState};
pub use limited::{
    olbfgs_step, olnaq_step, two_loop_direction, CurvatureMemory, InitialScaling, LimitedQnState,
};

use ndarray::{Array1, ArrayView1};
use thiserror::Error;

use crate::baselines::{Schedule, ScheduleError};
use crate::linalg::norm2;
use crate::model::{ModelError, StochasticObjective};

/// Default relative tolerance of the curvature guard `qᵀp > tol·‖q‖·‖p‖`.
pub const DEFAULT_CURVATURE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    /// The search direction vanished; the parameter update was skipped.
    #[error("zero search direction at iteration {k}")]
    ZeroDirection { k: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("invalid optimizer configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("curvature pair rejected: yᵀs = {curvature:e} does not exceed the guard {threshold:e}")]
pub struct CurvatureRejected {
    pub curvature: f64,
    pub threshold: f64,
}

/// Displacement `s` (or `p`) and gradient difference `y` (or `q`).
#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePair {
    pub s: Array1<f64>,
    pub y: Array1<f64>,
}

impl CurvaturePair {
    pub fn new(s: Array1<f64>, y: Array1<f64>) -> Self {
        assert_eq!(s.len(), y.len(), "curvature pair vectors differ in length");
        Self { s, y }
    }

    /// `yᵀs`.
    pub fn curvature(&self) -> f64 {
        self.y.dot(&self.s)
    }

    /// Accepts the pair iff `yᵀs > tol·‖y‖·‖s‖`. Non-finite pairs are rejected.
    pub fn check(&self, tol: f64) -> Result<f64, CurvatureRejected> {
        let curvature = self.curvature();
        let threshold = tol * norm2(self.y.view()) * norm2(self.s.view());
        if curvature > threshold && curvature.is_finite() {
            Ok(curvature)
        } else {
            Err(CurvatureRejected { curvature, threshold })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QnConfig {
    /// Momentum `μ`. Ignored by oBFGS/oLBFGS.
    pub momentum: f64,
    /// `λ ≥ 0` in `y = ∇E₂ − ∇E₁ + λs`.
    pub lambda: f64,
    pub schedule: Schedule,
    /// Scale the search direction to unit length before the step.
    pub normalize_direction: bool,
    pub curvature_tol: f64,
}

impl Default for QnConfig {
    fn default() -> Self {
        Self {
            momentum: 0.8,
            lambda: 1.0,
            schedule: Schedule::SqrtDecay { alpha0: 1.0 },
            normalize_direction: true,
            curvature_tol: DEFAULT_CURVATURE_TOL,
        }
    }
}

impl QnConfig {
    pub fn validate(&self) -> Result<(), StepError> {
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(StepError::Config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(StepError::Config(format!("lambda {} must be ≥ 0", self.lambda)));
        }
        if !(self.curvature_tol >= 0.0) {
            return Err(StepError::Config("curvature tolerance must be ≥ 0".into()));
        }
        Ok(())
    }
}

/// Outcome of one optimizer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Iteration counter the step ran with.
    pub k: u64,
    pub step_size: f64,
    /// Minibatch loss where the first gradient was taken (`w_k` or `w_k + μv_k`).
    pub loss_before: f64,
    /// Minibatch loss at `w_{k+1}`; equals `loss_before` for first-order steps.
    pub loss_after: f64,
    pub pair_accepted: bool,
    pub grad_evals: usize,
}

/// `g / ‖g‖₂`.
pub fn direction_normalize(g: ArrayView1<f64>) -> Result<Array1<f64>, ZeroDirection> {
    let n = norm2(g);
    if n == 0.0 || !n.is_finite() {
        return Err(ZeroDirection);
    }
    Ok(g.mapv(|x| x / n))
}

/// Returned by [`direction_normalize`] for a zero (or non-finite) vector.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("cannot normalize a zero direction")]
pub struct ZeroDirection;

/// An inverse-Hessian approximation usable by the shared iteration.
pub trait InverseHessian {
    /// Search direction `−H·grad`.
    fn direction(&self, grad: ArrayView1<f64>) -> Array1<f64>;

    /// Absorbs a curvature pair, or leaves the approximation untouched if the
    /// guard rejects it.
    fn update(&mut self, pair: CurvaturePair, tol: f64) -> Result<(), CurvatureRejected>;
}

/// Iterate shared by the four online quasi-Newton methods.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub w: Array1<f64>,
    pub v: Array1<f64>,
    pub k: u64,
}

impl Iterate {
    pub fn new(w: Array1<f64>) -> Self {
        let d = w.len();
        Self { w, v: Array1::zeros(d), k: 1 }
    }
}

/// One accelerated quasi-Newton iteration with momentum `momentum`.
///
/// On [`StepError::ZeroDirection`] the counter still advances while `w` and
/// `v` are left unchanged.
pub(crate) fn accelerated_step<O, H>(
    it: &mut Iterate,
    hess: &mut H,
    obj: &O,
    batch: &O::Batch,
    momentum: f64,
    cfg: &QnConfig,
) -> Result<StepReport, StepError>
where
    O: StochasticObjective + ?Sized,
    H: InverseHessian + ?Sized,
{
    cfg.validate()?;
    if !(0.0..1.0).contains(&momentum) {
        return Err(StepError::Config(format!("momentum {momentum} outside [0, 1)")));
    }
    if it.w.len() != obj.dim() {
        return Err(ModelError::DimensionMismatch { expected: obj.dim(), got: it.w.len() }.into());
    }
    let k = it.k;
    let step_size = cfg.schedule.step_size(k)?;

    let mut lookahead = it.w.clone();
    if momentum != 0.0 {
        lookahead.scaled_add(momentum, &it.v);
    }
    let (loss_before, grad_before) = obj.evaluate(lookahead.view(), batch)?;

    let raw = hess.direction(grad_before.view());
    let direction = if cfg.normalize_direction {
        direction_normalize(raw.view()).ok()
    } else if raw.iter().all(|&x| x == 0.0) {
        None
    } else {
        Some(raw)
    };
    let Some(direction) = direction else {
        it.k += 1;
        return Err(StepError::ZeroDirection { k });
    };

    let mut v_next = it.v.mapv(|x| momentum * x);
    v_next.scaled_add(step_size, &direction);
    let w_next = &it.w + &v_next;

    let (loss_after, grad_after) = obj.evaluate(w_next.view(), batch)?;
    let p = &w_next - &lookahead;
    let mut q = grad_after - &grad_before;
    if cfg.lambda != 0.0 {
        q.scaled_add(cfg.lambda, &p);
    }
    let pair_accepted = hess.update(CurvaturePair::new(p, q), cfg.curvature_tol).is_ok();

    it.w = w_next;
    it.v = v_next;
    it.k += 1;
    Ok(StepReport { k, step_size, loss_before, loss_after, pair_accepted, grad_evals: 2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn normalize_examples() {
        let n = direction_normalize(array![3.0, 4.0].view()).unwrap();
        assert!((n[0] - 0.6).abs() < 1e-15 && (n[1] - 0.8).abs() < 1e-15);
        let unit = array![0.0, 1.0, 0.0];
        assert_eq!(direction_normalize(unit.view()).unwrap(), unit);
        assert_eq!(direction_normalize(array![0.0, 0.0].view()), Err(ZeroDirection));
    }

    #[test]
    fn curvature_guard() {
        assert!(CurvaturePair::new(array![1.0, 0.0], array![0.0, 1.0]).check(1e-12).is_err());
        assert!(CurvaturePair::new(array![1.0, 0.0], array![-1.0, 0.0]).check(1e-12).is_err());
        assert!(CurvaturePair::new(array![1.0, 0.0], array![f64::NAN, 0.0]).check(1e-12).is_err());
        assert_eq!(CurvaturePair::new(array![1.0, 0.0], array![2.0, 0.0]).check(1e-12), Ok(2.0));
    }

    #[test]
    fn config_validation() {
        assert!(QnConfig::default().validate().is_ok());
        assert!(QnConfig { momentum: 1.0, ..Default::default() }.validate().is_err());
        assert!(QnConfig { lambda: -0.1, ..Default::default() }.validate().is_err());
    }
}
