//! Kernelized particle samplers built from an `(A, C)` description of an Itô
//! diffusion. Each MCMC dynamics in [`dynamics`] yields a deterministic particle
//! flow in [`sampler`], advanced by the integrators in [`integrator`].
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases below
//! cover the common case.

// `!(x > 0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bnn;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod kernels;
pub mod linalg;
pub mod sampler;
pub mod scalar;
pub mod targets;

pub use dynamics::{DynamicsKind, DynamicsSpec, RiemannConfig};
pub use error::{Error, Result};
pub use kernels::{BandwidthMode, KernelConfig};
pub use sampler::{Ensemble, Method, VelocityField};
pub use scalar::Scalar;
pub use targets::{AugmentedTarget, BlockLayout, TargetDensity};

pub type Ensemble64 = Ensemble<f64>;
pub type Ensemble32 = Ensemble<f32>;
pub type AugmentedTarget64 = AugmentedTarget<f64>;
pub type AugmentedTarget32 = AugmentedTarget<f32>;
pub type DynamicsSpec64 = DynamicsSpec<f64>;
pub type DynamicsSpec32 = DynamicsSpec<f32>;
pub type KernelConfig64 = KernelConfig<f64>;
pub type KernelConfig32 = KernelConfig<f32>;
pub type Gaussian64 = targets::Gaussian<f64>;
pub type GaussianMixture64 = targets::GaussianMixture<f64>;
pub type Dataset64 = bnn::Dataset<f64>;
