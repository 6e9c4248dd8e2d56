use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{BlockLayout, TargetDensity};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Gaussian reference `N(center·1, precision⁻¹ I)` for the thermostat block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thermostat<T> {
    pub center: T,
    pub precision: T,
}

/// `π(θ) N(r | 0, σ² I) N(ξ | c·1, μ⁻¹ I)`, with the `r` and `ξ` factors optional.
#[derive(Clone)]
pub struct AugmentedTarget<T: Scalar> {
    base: Arc<dyn TargetDensity<T>>,
    sigma2: T,
    thermostat: Option<Thermostat<T>>,
    layout: BlockLayout,
}

impl<T: Scalar> std::fmt::Debug for AugmentedTarget<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AugmentedTarget")
            .field("sigma2", &self.sigma2)
            .field("thermostat", &self.thermostat)
            .field("layout", &self.layout)
            .finish()
    }
}

/// Append a momentum block `r ~ N(0, σ² I)`.
pub fn augment_with_momentum<T: Scalar>(
    base: Arc<dyn TargetDensity<T>>,
    sigma2: T,
) -> Result<AugmentedTarget<T>> {
    if !(sigma2 > T::zero()) {
        return Err(Error::arg("momentum variance must be positive"));
    }
    let layout = BlockLayout::with_momentum(base.dim());
    Ok(AugmentedTarget {
        base,
        sigma2,
        thermostat: None,
        layout,
    })
}

/// Append momentum and a thermostat block `ξ ~ N(friction·1, μ⁻¹ I)`.
pub fn augment_with_thermostat<T: Scalar>(
    base: Arc<dyn TargetDensity<T>>,
    sigma2: T,
    friction: T,
    mu: T,
) -> Result<AugmentedTarget<T>> {
    if !(mu > T::zero()) {
        return Err(Error::arg("thermostat precision must be positive"));
    }
    if !friction.is_finite() {
        return Err(Error::arg("thermostat center must be finite"));
    }
    let mut t = augment_with_momentum(base, sigma2)?;
    t.layout = BlockLayout::with_thermostat(t.base.dim());
    t.thermostat = Some(Thermostat {
        center: friction,
        precision: mu,
    });
    Ok(t)
}

impl<T: Scalar> AugmentedTarget<T> {
    /// No auxiliary variables: the state is `θ` alone.
    pub fn plain(base: Arc<dyn TargetDensity<T>>) -> Self {
        let layout = BlockLayout::plain(base.dim());
        Self {
            base,
            sigma2: T::one(),
            thermostat: None,
            layout,
        }
    }

    pub fn base(&self) -> &Arc<dyn TargetDensity<T>> {
        &self.base
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    pub fn thermostat(&self) -> Option<Thermostat<T>> {
        self.thermostat
    }

    /// Same augmentation over a different base, e.g. a fresh minibatch posterior.
    pub fn with_base(&self, base: Arc<dyn TargetDensity<T>>) -> Result<Self> {
        if base.dim() != self.base.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.base.dim(),
                got: base.dim(),
            });
        }
        Ok(Self {
            base,
            sigma2: self.sigma2,
            thermostat: self.thermostat,
            layout: self.layout.clone(),
        })
    }

    /// `-U(θ) = log π(θ)` of the base target.
    pub fn base_logp(&self, x: ArrayView1<T>) -> T {
        self.base.logp(x.slice(s![self.layout.theta()]))
    }

    pub fn base_grad(&self, x: ArrayView1<T>) -> Array1<T> {
        self.base.grad_logp(x.slice(s![self.layout.theta()]))
    }
}

impl<T: Scalar> TargetDensity<T> for AugmentedTarget<T> {
    fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    fn logp(&self, x: ArrayView1<T>) -> T {
        let half = T::lit(0.5);
        let mut v = self.base_logp(x);
        let r = x.slice(s![self.layout.r()]);
        v -= r.dot(&r) * half / self.sigma2;
        if let Some(th) = self.thermostat {
            let sq: T = x
                .slice(s![self.layout.xi()])
                .iter()
                .map(|&xi| (xi - th.center) * (xi - th.center))
                .sum();
            v -= half * th.precision * sq;
        }
        v
    }

    fn grad_logp(&self, x: ArrayView1<T>) -> Array1<T> {
        let mut g = Array1::zeros(self.dim());
        g.slice_mut(s![self.layout.theta()])
            .assign(&self.base_grad(x));
        let inv = T::one() / self.sigma2;
        for i in self.layout.r() {
            g[i] = -x[i] * inv;
        }
        if let Some(th) = self.thermostat {
            for i in self.layout.xi() {
                g[i] = -th.precision * (x[i] - th.center);
            }
        }
        g
    }

    fn sample_exact(&self, rng: &mut dyn RngCore, count: usize) -> Option<Array2<T>> {
        let theta = self.base.sample_exact(rng, count)?;
        let mut out = Array2::zeros((count, self.dim()));
        out.slice_mut(s![.., self.layout.theta()]).assign(&theta);
        let sd = self.sigma2.sqrt();
        for mut row in out.rows_mut() {
            for i in self.layout.r() {
                let z: f64 = StandardNormal.sample(&mut *rng);
                row[i] = sd * T::lit(z);
            }
            if let Some(th) = self.thermostat {
                let sd_xi = T::one() / th.precision.sqrt();
                for i in self.layout.xi() {
                    let z: f64 = StandardNormal.sample(&mut *rng);
                    row[i] = th.center + sd_xi * T::lit(z);
                }
            }
        }
        Some(out)
    }
}
