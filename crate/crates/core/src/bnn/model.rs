use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::data::{Batch, Dataset, Standardization};
use super::params::{pre_activations, BnnShape};
use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;
use crate::targets::TargetDensity;

pub const GAMMA_SHAPE: f64 = 1.0;
/// Rate parametrization: `Gamma(1, 0.1)` has mean 10.
pub const GAMMA_RATE: f64 = 0.1;

fn check_batch<T: Scalar>(
    shape: BnnShape,
    flat: ArrayView1<T>,
    batch: &Batch<'_, T>,
) -> Result<()> {
    check_dim(shape.dim(), flat.len())?;
    if batch.x.nrows() == 0 {
        return Err(Error::arg("empty minibatch"));
    }
    if batch.x.nrows() != batch.y.len() {
        return Err(Error::arg("minibatch x and y lengths differ"));
    }
    check_dim(shape.d_in, batch.x.ncols())
}

/// `log Gamma(e^v | shape, rate) + v`, the density of `v = log γ`.
fn log_gamma_prior<T: Scalar>(v: T) -> T {
    let a = T::lit(GAMMA_SHAPE);
    let b = T::lit(GAMMA_RATE);
    // ln Γ(1) = 0
    a * b.ln() + a * v - b * v.exp()
}

fn d_log_gamma_prior<T: Scalar>(v: T) -> T {
    T::lit(GAMMA_SHAPE) - T::lit(GAMMA_RATE) * v.exp()
}

/// Network outputs for each row of standardized features.
fn forward<T: Scalar>(
    shape: BnnShape,
    flat: ArrayView1<T>,
    x: ArrayView2<T>,
) -> (Array2<T>, Array1<T>) {
    let pre = pre_activations(shape, flat, x);
    let w2 = flat.slice(s![shape.w2()]);
    let b2 = flat[shape.b2()];
    let out = pre
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(w2.iter())
                .map(|(&p, &w)| if p > T::zero() { p * w } else { T::zero() })
                .sum::<T>()
                + b2
        })
        .collect();
    (pre, out)
}

/// Standardized network outputs, one per row of `x`.
pub(crate) fn network_outputs<T: Scalar>(
    shape: BnnShape,
    flat: ArrayView1<T>,
    x: ArrayView2<T>,
) -> Array1<T> {
    forward(shape, flat, x).1
}

/// Log prior plus the likelihood of `batch` rescaled by `n_total / |batch|`.
pub fn bnn_log_posterior<T: Scalar>(
    shape: BnnShape,
    flat: ArrayView1<T>,
    batch: &Batch<'_, T>,
    n_total: usize,
) -> Result<T> {
    check_batch(shape, flat, batch)?;
    Ok(log_prior(shape, flat)
        + likelihood_scale(batch, n_total) * log_likelihood(shape, flat, batch))
}

fn likelihood_scale<T: Scalar>(batch: &Batch<'_, T>, n_total: usize) -> T {
    T::lit(n_total as f64) / T::lit(batch.x.nrows() as f64)
}

/// Unscaled batch log-likelihood `Σ log N(y | net(x), γ⁻¹)`.
pub(crate) fn log_likelihood<T: Scalar>(
    shape: BnnShape,
    flat: ArrayView1<T>,
    batch: &Batch<'_, T>,
) -> T {
    let half = T::lit(0.5);
    let log_gamma = flat[shape.log_gamma()];
    let gamma = log_gamma.exp();
    let norm = half * log_gamma - half * T::lit(2.0 * std::f64::consts::PI).ln();
    let (_, out) = forward(shape, flat, batch.x);
    out.iter()
        .zip(batch.y.iter())
        .map(|(&o, &y)| norm - half * gamma * (y - o) * (y - o))
        .sum()
}

pub(crate) fn log_prior<T: Scalar>(shape: BnnShape, flat: ArrayView1<T>) -> T {
    let half = T::lit(0.5);
    let log_lambda = flat[shape.log_lambda()];
    let lambda = log_lambda.exp();
    let p = shape.n_weights();
    let sq: T = flat.slice(s![..p]).iter().map(|&w| w * w).sum();
    let weights = T::lit(p as f64)
        * (half * log_lambda - half * T::lit(2.0 * std::f64::consts::PI).ln())
        - half * lambda * sq;
    weights + log_gamma_prior(flat[shape.log_gamma()]) + log_gamma_prior(log_lambda)
}

/// Backpropagated gradient of [`bnn_log_posterior`]; the ReLU derivative at 0 is 0.
pub fn bnn_grad_log_posterior<T: Scalar>(
    shape: BnnShape,
    flat: ArrayView1<T>,
    batch: &Batch<'_, T>,
    n_total: usize,
) -> Result<Array1<T>> {
    check_batch(shape, flat, batch)?;
    let half = T::lit(0.5);
    let scale = likelihood_scale(batch, n_total);
    let h = shape.hidden;
    let d_in = shape.d_in;
    let log_gamma = flat[shape.log_gamma()];
    let gamma = log_gamma.exp();
    let log_lambda = flat[shape.log_lambda()];
    let lambda = log_lambda.exp();
    let w2 = flat.slice(s![shape.w2()]);

    let mut g = Array1::<T>::zeros(shape.dim());
    let (pre, out) = forward(shape, flat, batch.x);
    let (b1_off, w2_off, b2_off) = (shape.b1().start, shape.w2().start, shape.b2());
    let mut sq_resid = T::zero();
    for (n, (&o, &y)) in out.iter().zip(batch.y.iter()).enumerate() {
        let e = y - o;
        sq_resid += e * e;
        let delta = scale * gamma * e;
        g[b2_off] += delta;
        let x = batch.x.row(n);
        for k in 0..h {
            let p = pre[[n, k]];
            if p > T::zero() {
                g[w2_off + k] += delta * p;
                let dh = delta * w2[k];
                g[b1_off + k] += dh;
                for a in 0..d_in {
                    g[a * h + k] += dh * x[a];
                }
            }
        }
    }
    let nb = T::lit(batch.x.nrows() as f64);
    g[shape.log_gamma()] =
        scale * (half * nb - half * gamma * sq_resid) + d_log_gamma_prior(log_gamma);

    let p = shape.n_weights();
    let mut sq_w = T::zero();
    for i in 0..p {
        let w = flat[i];
        g[i] -= lambda * w;
        sq_w += w * w;
    }
    g[shape.log_lambda()] =
        half * T::lit(p as f64) - half * lambda * sq_w + d_log_gamma_prior(log_lambda);
    Ok(g)
}

/// Glorot-normal weights, zero biases, `log γ = log λ = 0`.
pub fn init_params<T: Scalar>(shape: BnnShape, rng: &mut dyn RngCore) -> Array1<T> {
    let mut flat = Array1::zeros(shape.dim());
    let sd1 = (2.0 / (shape.d_in + shape.hidden) as f64).sqrt();
    for i in shape.w1() {
        let z: f64 = StandardNormal.sample(&mut *rng);
        flat[i] = T::lit(sd1 * z);
    }
    let sd2 = (2.0 / (shape.hidden + 1) as f64).sqrt();
    for i in shape.w2() {
        let z: f64 = StandardNormal.sample(&mut *rng);
        flat[i] = T::lit(sd2 * z);
    }
    flat
}

/// Predictions in original target units for raw features `x`: the ensemble mean
/// and one value per particle (rows of `thetas`).
pub fn predict<T: Scalar>(
    shape: BnnShape,
    thetas: ArrayView2<T>,
    x: ArrayView1<T>,
    standardization: &Standardization<T>,
) -> Result<(T, Array1<T>)> {
    if thetas.nrows() == 0 {
        return Err(Error::arg("prediction needs at least one particle"));
    }
    check_dim(shape.dim(), thetas.ncols())?;
    check_dim(shape.d_in, x.len())?;
    let z = standardization.features(x);
    let z = z.view().insert_axis(ndarray::Axis(0));
    let per: Array1<T> = thetas
        .rows()
        .into_iter()
        .map(|theta| standardization.target_inverse(forward(shape, theta, z).1[0]))
        .collect();
    let mean = per.mean().expect("non-empty");
    Ok((mean, per))
}

/// Posterior restricted to one minibatch of the training split.
#[derive(Clone, Debug)]
pub struct BnnTarget<T> {
    shape: BnnShape,
    x: Array2<T>,
    y: Array1<T>,
    n_total: usize,
}

impl<T: Scalar> BnnTarget<T> {
    pub fn full(shape: BnnShape, data: &Dataset<T>) -> Result<Self> {
        Self::minibatch(shape, data, &(0..data.n_train()).collect::<Vec<_>>())
    }

    /// `rows` index the training split.
    pub fn minibatch(shape: BnnShape, data: &Dataset<T>, rows: &[usize]) -> Result<Self> {
        check_dim(shape.d_in, data.d_in())?;
        if rows.is_empty() {
            return Err(Error::arg("empty minibatch"));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= data.n_train()) {
            return Err(Error::arg(format!("minibatch row {bad} out of range")));
        }
        Ok(Self {
            shape,
            x: data.x_train.select(ndarray::Axis(0), rows),
            y: data.y_train.select(ndarray::Axis(0), rows),
            n_total: data.n_train(),
        })
    }

    pub fn shape(&self) -> BnnShape {
        self.shape
    }

    fn batch(&self) -> Batch<'_, T> {
        Batch {
            x: self.x.view(),
            y: self.y.view(),
        }
    }

    pub fn into_shared(self) -> Arc<dyn TargetDensity<T>> {
        Arc::new(self)
    }
}

impl<T: Scalar> TargetDensity<T> for BnnTarget<T> {
    fn dim(&self) -> usize {
        self.shape.dim()
    }

    fn logp(&self, x: ArrayView1<T>) -> T {
        bnn_log_posterior(self.shape, x, &self.batch(), self.n_total).unwrap_or(T::nan())
    }

    fn grad_logp(&self, x: ArrayView1<T>) -> Array1<T> {
        bnn_grad_log_posterior(self.shape, x, &self.batch(), self.n_total)
            .unwrap_or_else(|_| Array1::from_elem(self.dim(), T::nan()))
    }
}
