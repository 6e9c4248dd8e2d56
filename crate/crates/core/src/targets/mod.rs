//! Un-normalized target densities and their momentum / thermostat augmentations.
//!
//! Every log-density omits its normalizing constant, so absolute values are only
//! comparable within one target.

mod augmented;
mod crescent;
mod gaussian;
mod layout;
mod mixture;

pub use augmented::{augment_with_momentum, augment_with_thermostat, AugmentedTarget, Thermostat};
pub use crescent::{tri_crescent_target, TriCrescent};
pub use gaussian::Gaussian;
pub use layout::BlockLayout;
pub use mixture::GaussianMixture;

use ndarray::{Array1, Array2, ArrayView1};
use rand::RngCore;

use crate::error::{check_dim, Result};
use crate::scalar::Scalar;

/// An un-normalized log-density over `R^dim` with an analytic score.
///
/// `logp` and `grad_logp` skip argument validation; use [`log_density`] and
/// [`grad_log_density`] at API boundaries.
///
/// [`log_density`]: TargetDensity::log_density
/// [`grad_log_density`]: TargetDensity::grad_log_density
pub trait TargetDensity<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn logp(&self, x: ArrayView1<T>) -> T;

    fn grad_logp(&self, x: ArrayView1<T>) -> Array1<T>;

    /// Exact i.i.d. draws, one per row, for targets that admit them.
    fn sample_exact(&self, _rng: &mut dyn RngCore, _count: usize) -> Option<Array2<T>> {
        None
    }

    fn log_density(&self, x: ArrayView1<T>) -> Result<T> {
        check_dim(self.dim(), x.len())?;
        Ok(self.logp(x))
    }

    fn grad_log_density(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.grad_logp(x))
    }
}

/// `log Σ exp(v)` with max subtraction.
pub(crate) fn log_sum_exp<T: Scalar>(values: &[T]) -> T {
    let m = values.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|&v| (v - m).exp()).sum::<T>().ln()
}

/// Softmax weights matching [`log_sum_exp`].
pub(crate) fn softmax<T: Scalar>(values: &[T]) -> Vec<T> {
    let m = values.iter().copied().fold(T::neg_infinity(), T::max);
    let w: Vec<T> = values.iter().map(|&v| (v - m).exp()).collect();
    let s: T = w.iter().copied().sum();
    w.into_iter().map(|v| v / s).collect()
}
