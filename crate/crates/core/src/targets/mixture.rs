use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, RngCore};

use super::{log_sum_exp, softmax, Gaussian, TargetDensity};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Finite mixture of Gaussians, evaluated with log-sum-exp.
#[derive(Clone, Debug)]
pub struct GaussianMixture<T: Scalar> {
    components: Vec<Gaussian<T>>,
    log_weights: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> GaussianMixture<T> {
    pub fn new(weights: Vec<T>, components: Vec<Gaussian<T>>) -> Result<Self> {
        if components.is_empty() || weights.len() != components.len() {
            return Err(Error::arg(
                "mixture needs one positive weight per component",
            ));
        }
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(Error::arg("mixture components must share a dimension"));
        }
        if weights.iter().any(|w| !(*w > T::zero()) || !w.is_finite()) {
            return Err(Error::arg("mixture weights must be positive"));
        }
        let total: T = weights.iter().copied().sum();
        let weights: Vec<T> = weights.into_iter().map(|w| w / total).collect();
        // per-component normalizer keeps relative masses right; the shared 2π factor is dropped
        let log_weights = weights
            .iter()
            .zip(&components)
            .map(|(w, c)| w.ln() - T::lit(0.5) * c.log_det_cov())
            .collect();
        Ok(Self {
            components,
            log_weights,
            weights,
        })
    }

    pub fn components(&self) -> &[Gaussian<T>] {
        &self.components
    }

    fn terms(&self, x: ArrayView1<T>) -> Vec<T> {
        self.components
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| *lw + c.logp(x))
            .collect()
    }
}

impl<T: Scalar> TargetDensity<T> for GaussianMixture<T> {
    fn dim(&self) -> usize {
        self.components[0].dim()
    }

    fn logp(&self, x: ArrayView1<T>) -> T {
        log_sum_exp(&self.terms(x))
    }

    fn grad_logp(&self, x: ArrayView1<T>) -> Array1<T> {
        let resp = softmax(&self.terms(x));
        let mut g = Array1::zeros(self.dim());
        for (c, r) in self.components.iter().zip(resp) {
            g.scaled_add(r, &c.grad_logp(x));
        }
        g
    }

    fn sample_exact(&self, rng: &mut dyn RngCore, count: usize) -> Option<Array2<T>> {
        let mut out = Array2::zeros((count, self.dim()));
        for mut row in out.rows_mut() {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = self.components.len() - 1;
            for (k, w) in self.weights.iter().enumerate() {
                acc += w.as_f64();
                if u < acc {
                    pick = k;
                    break;
                }
            }
            row.assign(&self.components[pick].draw(rng));
        }
        Some(out)
    }
}
