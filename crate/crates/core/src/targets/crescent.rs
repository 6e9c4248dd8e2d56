use ndarray::{array, Array1, ArrayView1};

use super::{log_sum_exp, softmax, TargetDensity};
use crate::scalar::Scalar;

const OFFSETS: [f64; 3] = [-2.0, 0.0, 2.0];

/// Equal-weight mixture of three crescents in the plane,
/// `p(x, y) ∝ ⅓ Σ_z exp(-x⁴/10 - (z·y - x²)²/2)` for `z ∈ {-2, 0, 2}`.
///
/// The quadratic term enters with a negative sign; with a positive sign the
/// density would not be normalizable. All three components peak at the origin,
/// where `log p = 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct TriCrescent;

pub fn tri_crescent_target() -> TriCrescent {
    TriCrescent
}

impl TriCrescent {
    fn terms<T: Scalar>(x: T, y: T) -> [T; 3] {
        let x2 = x * x;
        OFFSETS.map(|z| {
            let q = T::lit(z) * y - x2;
            -x2 * x2 / T::lit(10.0) - q * q / T::lit(2.0)
        })
    }
}

impl<T: Scalar> TargetDensity<T> for TriCrescent {
    fn dim(&self) -> usize {
        2
    }

    fn logp(&self, p: ArrayView1<T>) -> T {
        log_sum_exp(&Self::terms(p[0], p[1])) - T::lit(3.0).ln()
    }

    fn grad_logp(&self, p: ArrayView1<T>) -> Array1<T> {
        let (x, y) = (p[0], p[1]);
        let w = softmax(&Self::terms(x, y));
        let x2 = x * x;
        let mut gx = T::zero();
        let mut gy = T::zero();
        for (z, wi) in OFFSETS.iter().zip(w) {
            let z = T::lit(*z);
            let q = z * y - x2;
            gx += wi * (-T::lit(0.4) * x2 * x + T::lit(2.0) * x * q);
            gy += wi * (-z * q);
        }
        array![gx, gy]
    }
}
