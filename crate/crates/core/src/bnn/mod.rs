//! One-hidden-layer Bayesian regression network with Gamma hyperpriors.
//!
//! ```text
//! y | x ~ N(w2ᵀ relu(W1ᵀ x + b1) + b2, γ⁻¹)
//! W1, b1, w2, b2 ~ N(0, λ⁻¹)
//! γ, λ ~ Gamma(shape 1, rate 0.1)
//! ```
//!
//! Precisions are sampled as `log γ`, `log λ` so the state space is unconstrained.

mod data;
mod model;
mod params;

pub use data::{load_regression_csv, synthetic_sine, Batch, Dataset, Standardization};
pub(crate) use model::network_outputs;
pub use model::{
    bnn_grad_log_posterior, bnn_log_posterior, init_params, predict, BnnTarget, GAMMA_RATE,
    GAMMA_SHAPE,
};
pub use params::{BnnParams, BnnShape, DEFAULT_HIDDEN};
