//! Full-memory oBFGS and oNAQ.

use ndarray::{Array1, Array2, ArrayView1};

use super::{
    accelerated_step, CurvaturePair, CurvatureRejected, InverseHessian, Iterate, QnConfig,
    StepError, StepReport,
};
use crate::model::StochasticObjective;

/// Symmetric `d × d` inverse-Hessian approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseInverseHessian {
    h: Array2<f64>,
}

impl DenseInverseHessian {
    /// `ε·I`.
    pub fn scaled_identity(dim: usize, epsilon: f64) -> Self {
        Self { h: Array2::eye(dim) * epsilon }
    }

    /// Wraps an existing matrix. The caller guarantees symmetry.
    pub fn from_matrix(h: Array2<f64>) -> Self {
        assert_eq!(h.nrows(), h.ncols(), "inverse Hessian must be square");
        Self { h }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// BFGS inverse update
    /// `H' = (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ`, `ρ = 1/yᵀs`,
    /// evaluated as the equivalent rank-two correction
    /// `H' = H − ρ(s(Hy)ᵀ + (Hy)sᵀ) + (ρ²·yᵀHy + ρ)ssᵀ`.
    ///
    /// Each entry is computed from terms that are symmetric in `(i, j)`, so a
    /// symmetric `H` stays exactly symmetric.
    pub fn bfgs_update(&mut self, pair: &CurvaturePair, tol: f64) -> Result<(), CurvatureRejected> {
        let d = self.dim();
        assert_eq!(pair.s.len(), d, "curvature pair length differs from H");
        let ys = pair.check(tol)?;
        let rho = 1.0 / ys;
        let hy = self.h.dot(&pair.y);
        let yhy = pair.y.dot(&hy);
        let coef = rho * rho * yhy + rho;

        let s = pair.s.as_slice().expect("contiguous s");
        let hy = hy.as_slice().expect("contiguous Hy");
        for (i, mut row) in self.h.rows_mut().into_iter().enumerate() {
            let (si, hyi) = (s[i], hy[i]);
            let row = row.as_slice_mut().expect("row-major H");
            for j in 0..d {
                row[j] += -rho * (si * hy[j] + hyi * s[j]) + coef * (si * s[j]);
            }
        }
        Ok(())
    }
}

impl InverseHessian for DenseInverseHessian {
    fn direction(&self, grad: ArrayView1<f64>) -> Array1<f64> {
        -self.h.dot(&grad)
    }

    fn update(&mut self, pair: CurvaturePair, tol: f64) -> Result<(), CurvatureRejected> {
        self.bfgs_update(&pair, tol)
    }
}

/// `(w, v, H, k)` for the full-memory methods. `H₀ = εI`, `v₀ = 0`, `k₀ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseQnState {
    pub iterate: Iterate,
    pub hessian: DenseInverseHessian,
}

impl DenseQnState {
    pub fn new(w: Array1<f64>, epsilon: f64) -> Self {
        let d = w.len();
        Self { iterate: Iterate::new(w), hessian: DenseInverseHessian::scaled_identity(d, epsilon) }
    }

    pub fn with_hessian(w: Array1<f64>, hessian: DenseInverseHessian) -> Self {
        assert_eq!(w.len(), hessian.dim());
        Self { iterate: Iterate::new(w), hessian }
    }

    pub fn params(&self) -> &Array1<f64> {
        &self.iterate.w
    }

    pub fn k(&self) -> u64 {
        self.iterate.k
    }
}

/// One oBFGS iteration: both gradients on `batch`, no momentum.
pub fn obfgs_step<O: StochasticObjective + ?Sized>(
    state: &mut DenseQnState,
    obj: &O,
    batch: &O::Batch,
    cfg: &QnConfig,
) -> Result<StepReport, StepError> {
    accelerated_step(&mut state.iterate, &mut state.hessian, obj, batch, 0.0, cfg)
}

/// One oNAQ iteration with momentum `cfg.momentum`.
pub fn onaq_step<O: StochasticObjective + ?Sized>(
    state: &mut DenseQnState,
    obj: &O,
    batch: &O::Batch,
    cfg: &QnConfig,
) -> Result<StepReport, StepError> {
    accelerated_step(&mut state.iterate, &mut state.hessian, obj, batch, cfg.momentum, cfg)
}
