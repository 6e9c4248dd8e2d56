//! Squared-exponential kernel `k(x, y) = exp(-‖x - y‖² / h)` and bandwidth selection.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_H_MIN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthMode<T> {
    Fixed(T),
    /// `h = med² / log N` over pairwise particle distances.
    Median,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelConfig<T> {
    pub mode: BandwidthMode<T>,
    pub h_min: T,
}

impl<T: Scalar> KernelConfig<T> {
    pub fn median() -> Self {
        Self {
            mode: BandwidthMode::Median,
            h_min: T::lit(DEFAULT_H_MIN),
        }
    }

    pub fn fixed(h: T) -> Result<Self> {
        let cfg = Self {
            mode: BandwidthMode::Fixed(h),
            h_min: T::lit(DEFAULT_H_MIN),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h_min > T::zero()) {
            return Err(Error::arg("h_min must be positive"));
        }
        if let BandwidthMode::Fixed(h) = self.mode {
            if !(h > T::zero()) || !h.is_finite() {
                return Err(Error::arg("fixed bandwidth must be positive"));
            }
        }
        Ok(())
    }

    /// Bandwidth for the given particle positions (one per row).
    pub fn resolve(&self, positions: ArrayView2<T>) -> Result<T> {
        match self.mode {
            BandwidthMode::Fixed(h) => Ok(h),
            BandwidthMode::Median => median_bandwidth(positions, self.h_min),
        }
    }
}

#[inline]
pub(crate) fn sq_dist<T: Scalar>(x: ArrayView1<T>, y: ArrayView1<T>) -> T {
    x.iter()
        .zip(y.iter())
        .map(|(&a, &b)| (a - b) * (a - b))
        .fold(T::zero(), |acc, v| acc + v)
}

fn check_pair<T: Scalar>(x: ArrayView1<T>, y: ArrayView1<T>, h: T) -> Result<()> {
    check_dim(x.len(), y.len())?;
    if !(h > T::zero()) {
        return Err(Error::arg("kernel bandwidth must be positive"));
    }
    Ok(())
}

pub fn rbf_eval<T: Scalar>(x: ArrayView1<T>, y: ArrayView1<T>, h: T) -> Result<T> {
    check_pair(x, y, h)?;
    Ok((-sq_dist(x, y) / h).exp())
}

/// Gradient of `k(x, y)` with respect to `y`: `(2/h)(x - y) k(x, y)`.
pub fn rbf_grad2<T: Scalar>(x: ArrayView1<T>, y: ArrayView1<T>, h: T) -> Result<Array1<T>> {
    check_pair(x, y, h)?;
    let k = (-sq_dist(x, y) / h).exp();
    let c = T::lit(2.0) / h * k;
    Ok((&x - &y) * c)
}

/// Median heuristic `med² / log N`, floored at `h_min`.
///
/// A single particle has no pairwise distances and gets bandwidth 1.
pub fn median_bandwidth<T: Scalar>(positions: ArrayView2<T>, h_min: T) -> Result<T> {
    let n = positions.nrows();
    if n == 0 {
        return Err(Error::arg("median bandwidth of an empty ensemble"));
    }
    if n == 1 {
        return Ok(T::one().max(h_min));
    }
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let xi = positions.row(i);
        for j in i + 1..n {
            d.push(sq_dist(xi, positions.row(j)).sqrt());
        }
    }
    let cmp = |a: &T, b: &T| a.as_f64().total_cmp(&b.as_f64());
    let m = d.len();
    let (lower, upper, _) = d.select_nth_unstable_by(m / 2, cmp);
    let upper = *upper;
    let med = if m % 2 == 1 {
        upper
    } else {
        // the other middle value is the largest of the lower half
        let below = *lower.iter().max_by(|a, b| cmp(a, b)).expect("m >= 2");
        (below + upper) / T::lit(2.0)
    };
    let h = med * med / T::lit(n as f64).ln();
    Ok(if h.is_nan() { h_min } else { h.max(h_min) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn eval_examples() {
        let x = array![0.3, -1.0];
        assert_eq!(rbf_eval(x.view(), x.view(), 0.7).unwrap(), 1.0);
        let y = array![0.3 + 0.5, -1.0];
        let v = rbf_eval(x.view(), y.view(), 0.25).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        let v: f64 = rbf_eval(array![0.0].view(), array![2.0].view(), 1.0).unwrap();
        assert!((v - 0.018_315_638_888_734_18).abs() < 1e-15);
    }

    #[test]
    fn grad2_examples() {
        let x = array![1.0, 2.0];
        assert_eq!(
            rbf_grad2(x.view(), x.view(), 1.0).unwrap(),
            array![0.0, 0.0]
        );
        let g = rbf_grad2(array![-1.0].view(), array![1.0].view(), 1.0).unwrap();
        assert!((g[0] + 4.0 * (-4.0f64).exp()).abs() < 1e-15);
        assert!((g[0] + 0.073_262_555_554_936_72).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_bandwidth_and_dims() {
        let x = array![0.0];
        assert!(rbf_eval(x.view(), x.view(), 0.0).is_err());
        assert!(rbf_grad2(x.view(), x.view(), -1.0).is_err());
        assert!(rbf_eval(x.view(), array![0.0, 1.0].view(), 1.0).is_err());
        assert!(KernelConfig::fixed(0.0).is_err());
    }

    #[test]
    fn median_examples() {
        let two = array![[0.0], [2.0]];
        let h = median_bandwidth(two.view(), 1e-6).unwrap();
        assert!((h - 4.0 / 2f64.ln()).abs() < 1e-12);
        assert!((h - 5.770_780_163_555_854).abs() < 1e-9);

        let three = array![[0.0], [1.0], [3.0]];
        let h = median_bandwidth(three.view(), 1e-6).unwrap();
        assert!((h - 4.0 / 3f64.ln()).abs() < 1e-12);

        let same = Array2::from_elem((5, 3), 0.25);
        assert_eq!(median_bandwidth(same.view(), 1e-6).unwrap(), 1e-6);

        let one = array![[4.0, 1.0]];
        assert_eq!(median_bandwidth(one.view(), 1e-6).unwrap(), 1.0);
        assert!(median_bandwidth(Array2::<f64>::zeros((0, 2)).view(), 1e-6).is_err());
    }

    #[test]
    fn resolve_modes() {
        let p = array![[0.0], [2.0]];
        let fixed = KernelConfig::fixed(0.5).unwrap();
        assert_eq!(fixed.resolve(p.view()).unwrap(), 0.5);
        let med = KernelConfig::<f64>::median();
        assert!((med.resolve(p.view()).unwrap() - 4.0 / 2f64.ln()).abs() < 1e-12);
    }
}
