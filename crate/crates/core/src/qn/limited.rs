//! Limited-memory oLBFGS and oLNAQ.
//!
//! Nothing here allocates a `d × d` object: curvature is held as at most `m`
//! pairs of length-`d` vectors and applied with the two-loop recursion.

use std::collections::VecDeque;

use ndarray::{Array1, ArrayView1};

use super::{
    accelerated_step, CurvaturePair, CurvatureRejected, InverseHessian, Iterate, QnConfig,
    StepError, StepReport,
};
use crate::model::StochasticObjective;

/// Initial matrix `H⁰ = γI` used inside the two-loop recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialScaling {
    /// `γ = 1`.
    Unit,
    /// `γ = ε` while the memory is empty, otherwise the mean of `sᵢᵀyᵢ / yᵢᵀyᵢ`
    /// over the stored pairs. Averaging over all pairs damps sampling noise.
    Stochastic { epsilon: f64 },
}

/// FIFO of the last `m` accepted curvature pairs, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureMemory {
    pairs: VecDeque<CurvaturePair>,
    capacity: usize,
}

impl CurvatureMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "memory size must be positive");
        Self { pairs: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &CurvaturePair> + ExactSizeIterator {
        self.pairs.iter()
    }

    /// Stores a pair that passes the curvature guard, evicting the oldest pair
    /// at capacity. Rejected pairs are not stored.
    pub fn push(&mut self, pair: CurvaturePair, tol: f64) -> Result<(), CurvatureRejected> {
        pair.check(tol)?;
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(pair);
        Ok(())
    }

    /// Number of reals held for curvature data (at most `2·m·d`).
    pub fn stored_reals(&self) -> usize {
        self.pairs.iter().map(|p| p.s.len() + p.y.len()).sum()
    }

    /// `γ` for the given scaling rule.
    pub fn initial_scale(&self, scaling: InitialScaling) -> f64 {
        match scaling {
            InitialScaling::Unit => 1.0,
            InitialScaling::Stochastic { epsilon } if self.pairs.is_empty() => epsilon,
            InitialScaling::Stochastic { .. } => {
                let sum: f64 = self.pairs.iter().map(|p| p.curvature() / p.y.dot(&p.y)).sum();
                sum / self.pairs.len() as f64
            }
        }
    }
}

/// `η = −H·grad` for the implicit L-BFGS matrix built from `memory` with
/// `H⁰ = γI`. An empty memory gives `η = −γ·grad`.
pub fn two_loop_direction(
    grad: ArrayView1<f64>,
    memory: &CurvatureMemory,
    scaling: InitialScaling,
) -> Array1<f64> {
    let mut q = grad.to_owned();
    let mut alphas = Vec::with_capacity(memory.len());
    for pair in memory.iter().rev() {
        let rho = 1.0 / pair.curvature();
        let a = rho * pair.s.dot(&q);
        q.scaled_add(-a, &pair.y);
        alphas.push((a, rho));
    }
    q *= memory.initial_scale(scaling);
    for (pair, &(a, rho)) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * pair.y.dot(&q);
        q.scaled_add(a - b, &pair.s);
    }
    q.mapv_inplace(|x| -x);
    q
}

/// Memory plus scaling rule, applied through the two-loop recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitedHessian {
    pub memory: CurvatureMemory,
    pub scaling: InitialScaling,
}

impl InverseHessian for LimitedHessian {
    fn direction(&self, grad: ArrayView1<f64>) -> Array1<f64> {
        two_loop_direction(grad, &self.memory, self.scaling)
    }

    fn update(&mut self, pair: CurvaturePair, tol: f64) -> Result<(), CurvatureRejected> {
        self.memory.push(pair, tol)
    }
}

/// `(w, v, memory, k)` for the limited-memory methods.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitedQnState {
    pub iterate: Iterate,
    pub hessian: LimitedHessian,
}

impl LimitedQnState {
    pub fn new(w: Array1<f64>, memory_size: usize, scaling: InitialScaling) -> Self {
        Self {
            iterate: Iterate::new(w),
            hessian: LimitedHessian { memory: CurvatureMemory::new(memory_size), scaling },
        }
    }

    pub fn params(&self) -> &Array1<f64> {
        &self.iterate.w
    }

    pub fn k(&self) -> u64 {
        self.iterate.k
    }

    pub fn memory(&self) -> &CurvatureMemory {
        &self.hessian.memory
    }
}

pub fn olbfgs_step<O: StochasticObjective + ?Sized>(
    state: &mut LimitedQnState,
    obj: &O,
    batch: &O::Batch,
    cfg: &QnConfig,
) -> Result<StepReport, StepError> {
    accelerated_step(&mut state.iterate, &mut state.hessian, obj, batch, 0.0, cfg)
}

pub fn olnaq_step<O: StochasticObjective + ?Sized>(
    state: &mut LimitedQnState,
    obj: &O,
    batch: &O::Batch,
    cfg: &QnConfig,
) -> Result<StepReport, StepError> {
    accelerated_step(&mut state.iterate, &mut state.hessian, obj, batch, cfg.momentum, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qn::DenseInverseHessian;
    use ndarray::array;

    fn one_pair_memory() -> CurvatureMemory {
        let mut m = CurvatureMemory::new(4);
        m.push(CurvaturePair::new(array![1.0, 0.0], array![2.0, 0.0]), 1e-12).unwrap();
        m
    }

    #[test]
    fn empty_memory_is_steepest_descent() {
        let m = CurvatureMemory::new(3);
        assert_eq!(two_loop_direction(array![2.0, 0.0].view(), &m, InitialScaling::Unit), array![-2.0, 0.0]);
        let eps = two_loop_direction(array![2.0, 0.0].view(), &m, InitialScaling::Stochastic { epsilon: 1e-2 });
        assert_eq!(eps, array![-0.02, 0.0]);
    }

    #[test]
    fn single_pair_matches_dense_update() {
        let m = one_pair_memory();
        let eta = two_loop_direction(array![1.0, 1.0].view(), &m, InitialScaling::Unit);
        assert_eq!(eta, array![-0.5, -1.0]);

        let mut h = DenseInverseHessian::scaled_identity(2, 1.0);
        h.bfgs_update(m.iter().next().unwrap(), 1e-12).unwrap();
        assert_eq!(-h.matrix().dot(&array![1.0, 1.0]), eta);
    }

    #[test]
    fn stochastic_scale_is_mean_ratio() {
        let mut m = one_pair_memory();
        assert_eq!(m.initial_scale(InitialScaling::Stochastic { epsilon: 1e-2 }), 0.5);
        m.push(CurvaturePair::new(array![0.0, 1.0], array![0.0, 4.0]), 1e-12).unwrap();
        assert_eq!(m.initial_scale(InitialScaling::Stochastic { epsilon: 1e-2 }), (0.5 + 0.25) / 2.0);
        assert_eq!(m.initial_scale(InitialScaling::Unit), 1.0);
    }

    #[test]
    fn fifo_eviction_is_oldest_first() {
        let mut m = CurvatureMemory::new(2);
        for i in 1..=4 {
            let x = i as f64;
            m.push(CurvaturePair::new(array![x], array![x]), 1e-12).unwrap();
        }
        let kept: Vec<f64> = m.iter().map(|p| p.s[0]).collect();
        assert_eq!(kept, vec![3.0, 4.0]);
        assert_eq!(m.stored_reals(), 4);
    }

    #[test]
    fn rejected_pairs_are_not_stored() {
        let mut m = CurvatureMemory::new(2);
        assert!(m.push(CurvaturePair::new(array![1.0, 0.0], array![0.0, 1.0]), 1e-12).is_err());
        assert!(m.is_empty());
    }
}
