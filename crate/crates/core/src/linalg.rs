//! Dense helpers for the small symmetric matrices used by the Gaussian targets.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky<T: Scalar>(a: ArrayView2<T>) -> Result<Array2<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::arg("cholesky needs a square matrix"));
    }
    let mut l = Array2::<T>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(s > T::zero()) {
                    return Err(Error::arg("matrix is not positive definite"));
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Inverse of `L Lᵀ` given the Cholesky factor `L`.
pub fn cholesky_inverse<T: Scalar>(l: ArrayView2<T>) -> Array2<T> {
    let n = l.nrows();
    let mut inv = Array2::<T>::zeros((n, n));
    let mut e = Array1::<T>::zeros(n);
    for c in 0..n {
        e.fill(T::zero());
        e[c] = T::one();
        let col = cholesky_solve(l, e.view());
        inv.column_mut(c).assign(&col);
    }
    inv
}

/// Solve `L Lᵀ x = b`.
pub fn cholesky_solve<T: Scalar>(l: ArrayView2<T>, b: ArrayView1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut y = b.to_owned();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[[k, i]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    y
}

/// `log det(L Lᵀ)`.
pub fn cholesky_log_det<T: Scalar>(l: ArrayView2<T>) -> T {
    let two = T::lit(2.0);
    l.diag().iter().map(|d| two * d.ln()).sum()
}
