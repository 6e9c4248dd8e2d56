//! Catalog of Itô diffusions `dx = f(x) dt + √(2A(x)) dW` with
//! `f = (A + C)∇log π + ∇·(A + C)`, parametrized by a positive semi-definite
//! `A` and a skew-symmetric `C`.
//!
//! | kind         | state      | A                       | C                                              |
//! |--------------|------------|-------------------------|------------------------------------------------|
//! | `Ld`         | θ          | I                       | 0                                              |
//! | `Rld`        | θ          | G⁻¹(θ)                  | 0                                              |
//! | `Hmc`        | θ, r       | diag(0, a I)            | [[0, -I], [I, 0]]                              |
//! | `Nht`        | θ, r, ξ    | diag(0, a I, 0)         | [[0, -I, 0], [I, 0, D], [0, -D, 0]], D = diag(r)/(μσ²) |
//! | `Rhmc`       | θ, r       | diag(0, G⁻¹)            | [[0, -G^{-1/2}], [G^{-1/2}, 0]]                |
//! | `ThirdOrder` | θ, r, ξ    | diag(0, 0, a I)         | [[0, -I, 0], [I, 0, -γ I], [0, γ I, 0]]        |
//!
//! The Riemannian kinds use the scalar metric `G⁻¹(θ) = d·√|U(θ) + c| · I` with
//! `U = -log π` the base-target energy.

use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;
use crate::targets::{
    augment_with_momentum, augment_with_thermostat, AugmentedTarget, BlockLayout, TargetDensity,
};

/// Floor on `√|U + c|` in the Riemannian metric.
pub const METRIC_SQRT_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DynamicsKind {
    #[serde(rename = "LD")]
    Ld,
    #[serde(rename = "RLD")]
    Rld,
    #[serde(rename = "HMC")]
    Hmc,
    #[serde(rename = "NHT")]
    Nht,
    #[serde(rename = "RHMC")]
    Rhmc,
    #[serde(rename = "ThirdOrder")]
    ThirdOrder,
}

impl DynamicsKind {
    pub const ALL: [DynamicsKind; 6] = [
        DynamicsKind::Ld,
        DynamicsKind::Rld,
        DynamicsKind::Hmc,
        DynamicsKind::Nht,
        DynamicsKind::Rhmc,
        DynamicsKind::ThirdOrder,
    ];

    /// `A` and `C` do not depend on the state.
    pub fn is_constant(self) -> bool {
        matches!(
            self,
            DynamicsKind::Ld | DynamicsKind::Hmc | DynamicsKind::ThirdOrder
        )
    }

    pub fn has_momentum(self) -> bool {
        !matches!(self, DynamicsKind::Ld | DynamicsKind::Rld)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiemannConfig<T> {
    pub d_scale: T,
    pub c_offset: T,
}

impl<T: Scalar> Default for RiemannConfig<T> {
    fn default() -> Self {
        Self {
            d_scale: T::lit(1.5),
            c_offset: T::lit(0.5),
        }
    }
}

impl<T: Scalar> RiemannConfig<T> {
    /// Scalar inverse metric `g = d·max(√|U + c|, ε)` and its θ-gradient.
    fn metric(&self, target: &AugmentedTarget<T>, x: ArrayView1<T>) -> (T, Array1<T>) {
        let u = -target.base_logp(x) + self.c_offset;
        let raw = u.abs().sqrt();
        let floor = T::lit(METRIC_SQRT_FLOOR);
        let g = self.d_scale * raw.max(floor);
        let grad = if raw > floor {
            // ∇U = -∇log π
            let c = -self.d_scale * u.signum() / (T::lit(2.0) * raw);
            target.base_grad(x) * c
        } else {
            Array1::zeros(target.layout().theta_dim())
        };
        (g, grad)
    }
}

/// A named `(A, C)` pair with its hyperparameters and the state layout it acts on.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsSpec<T> {
    pub kind: DynamicsKind,
    /// Momentum variance σ².
    pub sigma2: T,
    /// Friction `a` in the diffusion block.
    pub friction: T,
    /// Thermostat precision μ.
    pub mu: T,
    /// Third-order coupling γ.
    pub gamma: T,
    pub riemann: RiemannConfig<T>,
    pub layout: BlockLayout,
}

impl<T: Scalar> DynamicsSpec<T> {
    fn with(kind: DynamicsKind, layout: BlockLayout) -> Self {
        Self {
            kind,
            sigma2: T::one(),
            friction: T::zero(),
            mu: T::one(),
            gamma: T::one(),
            riemann: RiemannConfig::default(),
            layout,
        }
    }

    pub fn ld(dim: usize) -> Self {
        Self::with(DynamicsKind::Ld, BlockLayout::plain(dim))
    }

    pub fn rld(dim: usize, riemann: RiemannConfig<T>) -> Self {
        Self {
            riemann,
            ..Self::with(DynamicsKind::Rld, BlockLayout::plain(dim))
        }
    }

    pub fn hmc(theta_dim: usize, sigma2: T, friction: T) -> Self {
        Self {
            sigma2,
            friction,
            ..Self::with(DynamicsKind::Hmc, BlockLayout::with_momentum(theta_dim))
        }
    }

    pub fn nht(theta_dim: usize, sigma2: T, friction: T, mu: T) -> Self {
        Self {
            sigma2,
            friction,
            mu,
            ..Self::with(DynamicsKind::Nht, BlockLayout::with_thermostat(theta_dim))
        }
    }

    pub fn rhmc(theta_dim: usize, sigma2: T, riemann: RiemannConfig<T>) -> Self {
        Self {
            sigma2,
            riemann,
            ..Self::with(DynamicsKind::Rhmc, BlockLayout::with_momentum(theta_dim))
        }
    }

    pub fn third_order(theta_dim: usize, sigma2: T, friction: T, gamma: T) -> Self {
        Self {
            sigma2,
            friction,
            gamma,
            ..Self::with(
                DynamicsKind::ThirdOrder,
                BlockLayout::with_thermostat(theta_dim),
            )
        }
    }

    /// Build the dynamics for `kind` over a parameter space of dimension `theta_dim`,
    /// taking whichever hyperparameters the kind uses.
    pub fn for_kind(
        kind: DynamicsKind,
        theta_dim: usize,
        sigma2: T,
        friction: T,
        mu: T,
        gamma: T,
        riemann: RiemannConfig<T>,
    ) -> Result<Self> {
        let spec = match kind {
            DynamicsKind::Ld => Self::ld(theta_dim),
            DynamicsKind::Rld => Self::rld(theta_dim, riemann),
            DynamicsKind::Hmc => Self::hmc(theta_dim, sigma2, friction),
            DynamicsKind::Nht => Self::nht(theta_dim, sigma2, friction, mu),
            DynamicsKind::Rhmc => Self::rhmc(theta_dim, sigma2, riemann),
            DynamicsKind::ThirdOrder => Self::third_order(theta_dim, sigma2, friction, gamma),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > T::zero()) {
            return Err(Error::arg("dynamics.sigma2 must be positive"));
        }
        if !(self.friction >= T::zero()) {
            return Err(Error::arg("dynamics.A must be non-negative"));
        }
        if !(self.mu > T::zero()) {
            return Err(Error::arg("dynamics.mu must be positive"));
        }
        if !self.gamma.is_finite() {
            return Err(Error::arg("dynamics.gamma must be finite"));
        }
        if !(self.riemann.d_scale > T::zero()) || !self.riemann.c_offset.is_finite() {
            return Err(Error::arg("dynamics.d_scale must be positive"));
        }
        Ok(())
    }

    /// The augmented target these dynamics are stationary for.
    ///
    /// The third-order auxiliary block uses the reference `N(0, σ² I)`.
    pub fn augment(&self, base: Arc<dyn TargetDensity<T>>) -> Result<AugmentedTarget<T>> {
        check_dim(self.layout.theta_dim(), base.dim())?;
        match self.kind {
            DynamicsKind::Ld | DynamicsKind::Rld => Ok(AugmentedTarget::plain(base)),
            DynamicsKind::Hmc | DynamicsKind::Rhmc => augment_with_momentum(base, self.sigma2),
            DynamicsKind::Nht => augment_with_thermostat(base, self.sigma2, self.friction, self.mu),
            DynamicsKind::ThirdOrder => {
                augment_with_thermostat(base, self.sigma2, T::zero(), T::one() / self.sigma2)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        self.kind.is_constant()
    }

    fn check(&self, target: &AugmentedTarget<T>, x: ArrayView1<T>) -> Result<()> {
        if target.layout() != &self.layout {
            return Err(Error::arg(format!(
                "target layout {:?} does not match dynamics layout {:?}",
                target.layout(),
                self.layout
            )));
        }
        check_dim(self.layout.total_dim(), x.len())
    }

    /// Dense `(A(x), C(x))`.
    pub fn eval_ac(
        &self,
        target: &AugmentedTarget<T>,
        x: ArrayView1<T>,
    ) -> Result<(Array2<T>, Array2<T>)> {
        self.check(target, x)?;
        Ok(self.ac_unchecked(target, x))
    }

    /// Dense `A(x) + C(x)`.
    pub fn eval_sum(&self, target: &AugmentedTarget<T>, x: ArrayView1<T>) -> Result<Array2<T>> {
        self.check(target, x)?;
        let (a, c) = self.ac_unchecked(target, x);
        Ok(a + c)
    }

    pub(crate) fn ac_unchecked(
        &self,
        target: &AugmentedTarget<T>,
        x: ArrayView1<T>,
    ) -> (Array2<T>, Array2<T>) {
        let n = self.layout.total_dim();
        let mut a = Array2::zeros((n, n));
        let mut c = Array2::zeros((n, n));
        let th = self.layout.theta();
        let r = self.layout.r();
        let xi = self.layout.xi();
        let d = th.len();
        match self.kind {
            DynamicsKind::Ld => a.diag_mut().fill(T::one()),
            DynamicsKind::Rld => {
                let (g, _) = self.riemann.metric(target, x);
                a.diag_mut().fill(g);
            }
            DynamicsKind::Hmc => {
                for k in 0..d {
                    a[[r.start + k, r.start + k]] = self.friction;
                    c[[th.start + k, r.start + k]] = -T::one();
                    c[[r.start + k, th.start + k]] = T::one();
                }
            }
            DynamicsKind::Nht => {
                let coupling = T::one() / (self.mu * self.sigma2);
                for k in 0..d {
                    let (ri, ti, xk) = (r.start + k, th.start + k, xi.start + k);
                    a[[ri, ri]] = self.friction;
                    c[[ti, ri]] = -T::one();
                    c[[ri, ti]] = T::one();
                    c[[ri, xk]] = coupling * x[ri];
                    c[[xk, ri]] = -coupling * x[ri];
                }
            }
            DynamicsKind::Rhmc => {
                let (g, _) = self.riemann.metric(target, x);
                let root = g.sqrt();
                for k in 0..d {
                    let (ri, ti) = (r.start + k, th.start + k);
                    a[[ri, ri]] = g;
                    c[[ti, ri]] = -root;
                    c[[ri, ti]] = root;
                }
            }
            DynamicsKind::ThirdOrder => {
                for k in 0..d {
                    let (ri, ti, xk) = (r.start + k, th.start + k, xi.start + k);
                    a[[xk, xk]] = self.friction;
                    c[[ti, ri]] = -T::one();
                    c[[ri, ti]] = T::one();
                    c[[ri, xk]] = -self.gamma;
                    c[[xk, ri]] = self.gamma;
                }
            }
        }
        (a, c)
    }

    /// Row-wise divergence `Σ_j ∂(A + C)_{ij} / ∂x_j`, in closed form.
    pub fn divergence(&self, target: &AugmentedTarget<T>, x: ArrayView1<T>) -> Result<Array1<T>> {
        self.check(target, x)?;
        Ok(self.divergence_unchecked(target, x))
    }

    pub(crate) fn divergence_unchecked(
        &self,
        target: &AugmentedTarget<T>,
        x: ArrayView1<T>,
    ) -> Array1<T> {
        let n = self.layout.total_dim();
        let mut div = Array1::zeros(n);
        match self.kind {
            DynamicsKind::Ld | DynamicsKind::Hmc | DynamicsKind::ThirdOrder => {}
            DynamicsKind::Nht => {
                let v = -T::one() / (self.mu * self.sigma2);
                div.slice_mut(s![self.layout.xi()]).fill(v);
            }
            DynamicsKind::Rld => {
                let (_, grad) = self.riemann.metric(target, x);
                div.slice_mut(s![self.layout.theta()]).assign(&grad);
            }
            DynamicsKind::Rhmc => {
                // r-rows carry √g(θ) in the θ-columns
                let (g, grad) = self.riemann.metric(target, x);
                let c = T::one() / (T::lit(2.0) * g.sqrt());
                div.slice_mut(s![self.layout.r()]).assign(&(grad * c));
            }
        }
        div
    }

    /// Central finite-difference divergence with step `1e-5·(1 + |x_j|)`.
    pub fn divergence_fd(
        &self,
        target: &AugmentedTarget<T>,
        x: ArrayView1<T>,
    ) -> Result<Array1<T>> {
        self.check(target, x)?;
        let n = x.len();
        let mut div = Array1::zeros(n);
        let mut xp = x.to_owned();
        for j in 0..n {
            let step = T::lit(1e-5) * (T::one() + x[j].abs());
            xp[j] = x[j] + step;
            let (ap, cp) = self.ac_unchecked(target, xp.view());
            xp[j] = x[j] - step;
            let (am, cm) = self.ac_unchecked(target, xp.view());
            xp[j] = x[j];
            let two_step = T::lit(2.0) * step;
            for i in 0..n {
                div[i] += (ap[[i, j]] + cp[[i, j]] - am[[i, j]] - cm[[i, j]]) / two_step;
            }
        }
        Ok(div)
    }

    /// Drift `f(x) = (A + C)(x) ∇log π(x) + ∇·(A + C)(x)`.
    pub fn drift(&self, target: &AugmentedTarget<T>, x: ArrayView1<T>) -> Result<Array1<T>> {
        self.check(target, x)?;
        let (a, c) = self.ac_unchecked(target, x);
        Ok((a + c).dot(&target.grad_logp(x)) + self.divergence_unchecked(target, x))
    }
}
