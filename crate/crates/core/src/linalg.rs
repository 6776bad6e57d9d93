//! Small dense helpers that ndarray does not provide without LAPACK.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

#[inline]
pub fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.dot(&b)
}

#[inline]
pub fn norm2(a: ArrayView1<f64>) -> f64 {
    a.dot(&a).sqrt()
}

pub fn norm_inf(a: ArrayView1<f64>) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`, or `None` when `A`
/// is not square, not finite, or not positive definite.
pub fn cholesky(a: ArrayView2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return None;
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return None;
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Largest absolute asymmetry `|A_ij - A_ji|` scaled by `max(1, |A_ij|)`.
pub fn max_relative_asymmetry(a: ArrayView2<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (a[[i, j]] - a[[j, i]]).abs() / a[[i, j]].abs().max(1.0);
            worst = worst.max(diff);
        }
    }
    worst
}

/// Orthonormalizes the columns of `m` in place (modified Gram-Schmidt).
/// Returns `None` if the columns are numerically dependent.
pub fn orthonormalize_columns(mut m: Array2<f64>) -> Option<Array2<f64>> {
    let n = m.ncols();
    for j in 0..n {
        for i in 0..j {
            let proj = m.column(i).dot(&m.column(j));
            let ci: Array1<f64> = m.column(i).to_owned();
            m.column_mut(j).scaled_add(-proj, &ci);
        }
        let nrm = norm2(m.column(j));
        if nrm < 1e-10 {
            return None;
        }
        m.column_mut(j).mapv_inplace(|x| x / nrm);
    }
    Some(m)
}
