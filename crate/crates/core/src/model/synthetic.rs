//! Deterministic test functions. The batch argument is ignored.

use ndarray::{array, Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{check_dim, ModelError, StochasticObjective};
use crate::linalg::{cholesky, orthonormalize_columns};

/// `f(w) = ½ wᵀAw − cᵀw` with `∇f = Aw − c`.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    a: Array2<f64>,
    c: Array1<f64>,
}

impl QuadraticObjective {
    /// Fails with [`ModelError::NotPositiveDefinite`] unless `a` is symmetric
    /// and Cholesky-factorizable.
    pub fn new(a: Array2<f64>, c: Array1<f64>) -> Result<Self, ModelError> {
        let d = a.nrows();
        if a.ncols() != d || c.len() != d {
            return Err(ModelError::DimensionMismatch { expected: d, got: c.len() });
        }
        let symmetric = (0..d).all(|i| (0..i).all(|j| a[[i, j]] == a[[j, i]]));
        if !symmetric || cholesky(a.view()).is_none() {
            return Err(ModelError::NotPositiveDefinite);
        }
        Ok(Self { a, c })
    }

    /// Random SPD quadratic with eigenvalues log-spaced in `[1, condition]`
    /// and a standard normal linear term.
    pub fn random(dim: usize, condition: f64, seed: u64) -> Result<Self, ModelError> {
        if dim == 0 || !(condition >= 1.0) {
            return Err(ModelError::InvalidSpec("need dim ≥ 1 and condition ≥ 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = loop {
            let m = Array2::from_shape_fn((dim, dim), |_| StandardNormal.sample(&mut rng));
            if let Some(q) = orthonormalize_columns(m) {
                break q;
            }
        };
        let eig = Array1::from_shape_fn(dim, |i| {
            if dim == 1 {
                1.0
            } else {
                condition.powf(i as f64 / (dim - 1) as f64)
            }
        });
        let scaled = &q * &eig;
        let mut a = scaled.dot(&q.t());
        // Exact symmetry for the constructor's check.
        for i in 0..dim {
            for j in 0..i {
                let avg = 0.5 * (a[[i, j]] + a[[j, i]]);
                a[[i, j]] = avg;
                a[[j, i]] = avg;
            }
        }
        let c = Array1::from_shape_fn(dim, |_| StandardNormal.sample(&mut rng));
        Self::new(a, c)
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn linear_term(&self) -> &Array1<f64> {
        &self.c
    }
}

impl StochasticObjective for QuadraticObjective {
    type Batch = ();

    fn dim(&self) -> usize {
        self.c.len()
    }

    fn evaluate(&self, w: ArrayView1<f64>, _: &()) -> Result<(f64, Array1<f64>), ModelError> {
        check_dim(self.dim(), w)?;
        let aw = self.a.dot(&w);
        let loss = 0.5 * w.dot(&aw) - self.c.dot(&w);
        Ok((loss, aw - &self.c))
    }
}

/// `f(x, y) = (1 − x)² + 100 (y − x²)²`, minimum at `(1, 1)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RosenbrockObjective;

impl StochasticObjective for RosenbrockObjective {
    type Batch = ();

    fn dim(&self) -> usize {
        2
    }

    fn evaluate(&self, w: ArrayView1<f64>, _: &()) -> Result<(f64, Array1<f64>), ModelError> {
        check_dim(2, w)?;
        let (x, y) = (w[0], w[1]);
        let r = y - x * x;
        let loss = (1.0 - x).powi(2) + 100.0 * r * r;
        let grad = array![-2.0 * (1.0 - x) - 400.0 * x * r, 200.0 * r];
        Ok((loss, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_quadratic() {
        let q = QuadraticObjective::new(Array2::eye(2), Array1::zeros(2)).unwrap();
        let (loss, grad) = q.evaluate(array![1.0, 1.0].view(), &()).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(grad, array![1.0, 1.0]);
    }

    #[test]
    fn diagonal_quadratic_gradient() {
        let q = QuadraticObjective::new(array![[1.0, 0.0], [0.0, 10.0]], Array1::zeros(2)).unwrap();
        let (_, grad) = q.evaluate(array![1.0, 1.0].view(), &()).unwrap();
        assert_eq!(grad, array![1.0, 10.0]);
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let err = QuadraticObjective::new(array![[1.0, 2.0], [2.0, 1.0]], Array1::zeros(2));
        assert_eq!(err.unwrap_err(), ModelError::NotPositiveDefinite);
    }

    #[test]
    fn rosenbrock_minimum() {
        let (loss, grad) = RosenbrockObjective.evaluate(array![1.0, 1.0].view(), &()).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad, array![0.0, 0.0]);
    }

    #[test]
    fn random_quadratic_is_spd_and_seeded() {
        let a = QuadraticObjective::random(10, 100.0, 4).unwrap();
        let b = QuadraticObjective::random(10, 100.0, 4).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert!(cholesky(a.matrix().view()).is_some());
    }
}
