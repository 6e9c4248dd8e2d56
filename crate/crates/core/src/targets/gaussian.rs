use ndarray::{Array1, Array2, ArrayView1};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::TargetDensity;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_inverse, cholesky_log_det};
use crate::scalar::Scalar;

/// Multivariate normal, `log p(x) = -½ (x-μ)ᵀ Σ⁻¹ (x-μ)`.
#[derive(Clone, Debug)]
pub struct Gaussian<T: Scalar> {
    mean: Array1<T>,
    cov: Array2<T>,
    precision: Array2<T>,
    chol: Array2<T>,
}

impl<T: Scalar> Gaussian<T> {
    pub fn new(mean: Array1<T>, cov: Array2<T>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || cov.dim() != (d, d) {
            return Err(Error::arg(format!(
                "covariance must be {d}x{d}, got {:?}",
                cov.dim()
            )));
        }
        for i in 0..d {
            for j in 0..i {
                if (cov[[i, j]] - cov[[j, i]]).abs()
                    > T::lit(1e-12) * (T::one() + cov[[i, j]].abs())
                {
                    return Err(Error::arg("covariance must be symmetric"));
                }
            }
        }
        let chol = cholesky(cov.view())?;
        let precision = cholesky_inverse(chol.view());
        Ok(Self {
            mean,
            cov,
            precision,
            chol,
        })
    }

    pub fn standard(dim: usize) -> Self {
        Self::new(Array1::zeros(dim.max(1)), Array2::eye(dim.max(1))).expect("identity is SPD")
    }

    pub fn mean(&self) -> &Array1<T> {
        &self.mean
    }

    pub fn cov(&self) -> &Array2<T> {
        &self.cov
    }

    /// `log det Σ`, used to weight mixture components.
    pub fn log_det_cov(&self) -> T {
        cholesky_log_det(self.chol.view())
    }

    pub(crate) fn draw(&self, rng: &mut dyn RngCore) -> Array1<T> {
        let d = self.mean.len();
        let z: Array1<T> = (0..d)
            .map(|_| T::lit(StandardNormal.sample(&mut *rng)))
            .collect();
        &self.mean + &self.chol.dot(&z)
    }
}

impl<T: Scalar> TargetDensity<T> for Gaussian<T> {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn logp(&self, x: ArrayView1<T>) -> T {
        let c = &x - &self.mean;
        -T::lit(0.5) * c.dot(&self.precision.dot(&c))
    }

    fn grad_logp(&self, x: ArrayView1<T>) -> Array1<T> {
        let c = &x - &self.mean;
        -self.precision.dot(&c)
    }

    fn sample_exact(&self, rng: &mut dyn RngCore, count: usize) -> Option<Array2<T>> {
        let mut out = Array2::zeros((count, self.dim()));
        for mut row in out.rows_mut() {
            row.assign(&self.draw(rng));
        }
        Some(out)
    }
}
