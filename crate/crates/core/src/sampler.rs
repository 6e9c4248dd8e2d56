//! Particle velocity fields and stochastic baselines.
//!
//! Every velocity is computed from an immutable snapshot of the ensemble. Work is
//! split across particles `i`; the inner sum over `j` always runs sequentially in
//! index order, so results are bitwise reproducible for any thread count.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::DynamicsSpec;
use crate::error::{check_dim, Error, Result};
use crate::kernels::{sq_dist, KernelConfig};
use crate::scalar::Scalar;
use crate::targets::{AugmentedTarget, BlockLayout, TargetDensity};

/// `N` particles in the augmented state space, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble<T: Scalar> {
    positions: Array2<T>,
    layout: BlockLayout,
    /// Number of updates applied since initialization.
    pub generation: usize,
}

impl<T: Scalar> Ensemble<T> {
    pub fn new(positions: Array2<T>, layout: BlockLayout) -> Result<Self> {
        if positions.nrows() == 0 {
            return Err(Error::arg("ensemble needs at least one particle"));
        }
        check_dim(layout.total_dim(), positions.ncols())?;
        if let Some((i, _)) = positions
            .rows()
            .into_iter()
            .enumerate()
            .find(|(_, r)| r.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Numerical {
                what: "position",
                particle: i,
                iteration: None,
            });
        }
        Ok(Self {
            positions,
            layout,
            generation: 0,
        })
    }

    pub fn positions(&self) -> &Array2<T> {
        &self.positions
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.positions.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.positions.ncols()
    }

    /// Parameter block of every particle.
    pub fn theta(&self) -> ArrayView2<'_, T> {
        self.positions.slice(s![.., self.layout.theta()])
    }

    pub fn particle(&self, i: usize) -> ArrayView1<'_, T> {
        self.positions.row(i)
    }

    /// `x ← x + step · v` over the coordinate range `cols` only.
    pub fn advance(
        &self,
        velocity: &VelocityField<T>,
        step: T,
        cols: std::ops::Range<usize>,
    ) -> Result<Self> {
        if velocity.values.dim() != self.positions.dim() {
            return Err(Error::arg("velocity shape does not match ensemble"));
        }
        let mut next = self.clone();
        if step != T::zero() {
            Zip::from(next.positions.slice_mut(s![.., cols.clone()]))
                .and(velocity.values.slice(s![.., cols]))
                .for_each(|x, &v| *x += step * v);
        }
        next.check_finite()?;
        Ok(next)
    }

    pub(crate) fn positions_mut(&mut self) -> &mut Array2<T> {
        &mut self.positions
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        for (i, row) in self.positions.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical {
                    what: "position",
                    particle: i,
                    iteration: None,
                });
            }
        }
        Ok(())
    }
}

/// One velocity per particle.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField<T> {
    pub values: Array2<T>,
}

/// Particle update rule selected in a run configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// GSVGD with overdamped Langevin dynamics.
    Svgd,
    Gsvgd,
    GsvgdAlt,
    /// Blob estimator with overdamped Langevin dynamics.
    Blob,
    ParviBlob,
    /// Independent Euler–Maruyama chains.
    Mcmc,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Svgd,
        Method::Gsvgd,
        Method::GsvgdAlt,
        Method::Blob,
        Method::ParviBlob,
        Method::Mcmc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Svgd => "svgd",
            Method::Gsvgd => "gsvgd",
            Method::GsvgdAlt => "gsvgd_alt",
            Method::Blob => "blob",
            Method::ParviBlob => "parvi_blob",
            Method::Mcmc => "mcmc",
        }
    }

    pub fn is_deterministic(self) -> bool {
        self != Method::Mcmc
    }

    /// Velocity at a resolved bandwidth `h`. Not defined for [`Method::Mcmc`].
    pub fn velocity<T: Scalar>(
        self,
        e: &Ensemble<T>,
        target: &AugmentedTarget<T>,
        dynamics: &DynamicsSpec<T>,
        h: T,
    ) -> Result<VelocityField<T>> {
        match self {
            Method::Svgd | Method::Gsvgd => gsvgd_velocity_at(e, target, dynamics, h),
            Method::GsvgdAlt => gsvgd_velocity_alt_at(e, target, dynamics, h),
            Method::Blob | Method::ParviBlob => parvi_blob_velocity_at(e, target, dynamics, h),
            Method::Mcmc => Err(Error::UnsupportedDynamics(
                "mcmc has no deterministic velocity field".into(),
            )),
        }
    }
}

fn check_setup<T: Scalar>(
    e: &Ensemble<T>,
    target: &AugmentedTarget<T>,
    dynamics: &DynamicsSpec<T>,
) -> Result<()> {
    if e.layout() != target.layout() || target.layout() != &dynamics.layout {
        return Err(Error::arg(
            "ensemble, target and dynamics must share one block layout",
        ));
    }
    Ok(())
}

/// Diffusion matrices used in the repulsive term.
enum Repulsion<T> {
    Constant(Array2<T>),
    PerParticle(Vec<Array2<T>>),
}

/// Drift `f(x_j)` for every particle plus the matrices multiplying `∇₂k`.
fn particle_terms<T: Scalar>(
    e: &Ensemble<T>,
    target: &AugmentedTarget<T>,
    dynamics: &DynamicsSpec<T>,
    diffusion_only: bool,
) -> Result<(Array2<T>, Repulsion<T>)> {
    let n = e.len();
    if dynamics.is_constant() && n > 0 {
        // one shared matrix pair; the divergence vanishes
        let (a, c) = dynamics.ac_unchecked(target, e.particle(0));
        let sum = &a + &c;
        let drift: Vec<Array1<T>> = (0..n)
            .into_par_iter()
            .map(|j| sum.dot(&target.grad_logp(e.particle(j))))
            .collect();
        let mut out = Array2::zeros(e.positions().raw_dim());
        for (j, f) in drift.into_iter().enumerate() {
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical {
                    what: "drift",
                    particle: j,
                    iteration: None,
                });
            }
            out.row_mut(j).assign(&f);
        }
        return Ok((
            out,
            Repulsion::Constant(if diffusion_only { a } else { sum }),
        ));
    }
    let rows: Vec<(Array1<T>, Array2<T>)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let x = e.particle(j);
            let (a, c) = dynamics.ac_unchecked(target, x);
            let sum = &a + &c;
            let f = sum.dot(&target.grad_logp(x)) + dynamics.divergence_unchecked(target, x);
            (f, if diffusion_only { a } else { sum })
        })
        .collect();
    let mut drift = Array2::zeros(e.positions().raw_dim());
    let mut mats = Vec::with_capacity(n);
    for (j, (f, m)) in rows.into_iter().enumerate() {
        if f.iter().any(|v| !v.is_finite()) || m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                what: "drift",
                particle: j,
                iteration: None,
            });
        }
        drift.row_mut(j).assign(&f);
        mats.push(m);
    }
    Ok((drift, Repulsion::PerParticle(mats)))
}

/// `v_i = (1/N) Σ_j [ f_j k(x_i, x_j) + M_j ∇₂k(x_i, x_j) ]`.
fn stein_sum<T: Scalar>(
    positions: ArrayView2<T>,
    drift: &Array2<T>,
    rep: &Repulsion<T>,
    h: T,
) -> Result<VelocityField<T>> {
    let (n, d) = positions.dim();
    let scale = T::lit(2.0) / h;
    let inv_n = T::one() / T::lit(n as f64);
    // flat row-major copies keep the O(N²) loop free of view overhead
    let xs: Vec<T> = positions.iter().copied().collect();
    let fs: Vec<T> = drift.iter().copied().collect();
    let ms: Vec<T> = match rep {
        Repulsion::Constant(_) => Vec::new(),
        Repulsion::PerParticle(ms) => ms.iter().flat_map(|m| m.iter().copied()).collect(),
    };
    let rows: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = &xs[i * d..(i + 1) * d];
            let mut acc = vec![T::zero(); d];
            let mut pull = vec![T::zero(); d];
            let mut diff = vec![T::zero(); d];
            for j in 0..n {
                let xj = &xs[j * d..(j + 1) * d];
                let mut sq = T::zero();
                for (a, b) in xi.iter().zip(xj) {
                    sq += (*a - *b) * (*a - *b);
                }
                let k = (-sq / h).exp();
                for (a, f) in acc.iter_mut().zip(&fs[j * d..(j + 1) * d]) {
                    *a += k * *f;
                }
                match rep {
                    Repulsion::Constant(_) => {
                        for ((p, a), b) in pull.iter_mut().zip(xi).zip(xj) {
                            *p += k * (*a - *b);
                        }
                    }
                    Repulsion::PerParticle(_) => {
                        for ((g, a), b) in diff.iter_mut().zip(xi).zip(xj) {
                            *g = scale * k * (*a - *b);
                        }
                        let m = &ms[j * d * d..(j + 1) * d * d];
                        for (p, mrow) in pull.iter_mut().zip(m.chunks_exact(d)) {
                            let mut dot = T::zero();
                            for (w, g) in mrow.iter().zip(&diff) {
                                dot += *w * *g;
                            }
                            *p += dot;
                        }
                    }
                }
            }
            if let Repulsion::Constant(m) = rep {
                let pushed = m.dot(&Array1::from(pull)) * scale;
                for (a, p) in acc.iter_mut().zip(pushed.iter()) {
                    *a += *p;
                }
            } else {
                for (a, p) in acc.iter_mut().zip(&pull) {
                    *a += *p;
                }
            }
            acc.into_iter().map(|a| a * inv_n).collect()
        })
        .collect();
    let mut values = Array2::zeros((n, d));
    for (i, row) in rows.into_iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                what: "velocity",
                particle: i,
                iteration: None,
            });
        }
        values.row_mut(i).assign(&ArrayView1::from(&row));
    }
    Ok(VelocityField { values })
}

/// GSVGD velocity: the diffusion Stein operator applied to `k(x_i, ·)`, averaged
/// over the ensemble (self term included).
pub fn gsvgd_velocity<T: Scalar>(
    e: &Ensemble<T>,
    target: &AugmentedTarget<T>,
    dynamics: &DynamicsSpec<T>,
    kernel: &KernelConfig<T>,
) -> Result<VelocityField<T>> {
    let h = kernel.resolve(e.positions().view())?;
    gsvgd_velocity_at(e, target, dynamics, h)
}

pub fn gsvgd_velocity_at<T: Scalar>(
    e: &Ensemble<T>,
    target: &AugmentedTarget<T>,
    dynamics: &DynamicsSpec<T>,
    h: T,
) -> Result<VelocityField<T>> {
    check_setup(e, target, dynamics)?;
    let (drift, rep) = particle_terms(e, target, dynamics, false)?;
    stein_sum(e.positions().view(), &drift, &rep, h)
}

/// Variant whose repulsive term uses `A` alone:
/// `v_i = (1/N) Σ_j [ f_j k(x_i, x_j) + A_j ∇₂k(x_i, x_j) ]`.
pub fn gsvgd_velocity_alt<T: Scalar>(
    e: &Ensemble<T>,
    target: &AugmentedTarget<T>,
    dynamics: &DynamicsSpec<T>,
    kernel: &KernelConfig<T>,
) -> Result<VelocityField<T>> {
    let h = kernel.resolve(e.positions().view())?;
    gsvgd_velocity_alt_at(e, target, dynamics, h)
}

pub fn gsvgd_velocity_alt_at<T: Scalar>(
    e: &Ensemble<T>,
    target: &AugmentedTarget<T>,
    dynamics: &DynamicsSpec<T>,
    h: T,
) -> Result<VelocityField<T>> {
    check_setup(e, target, dynamics)?;
    let (drift, rep) = particle_terms(e, target, dynamics, true)?;
    stein_sum(e.positions().view(), &drift, &rep, h)
}

/// Blob estimate of `∇log ρ` at each particle:
/// `Σ_j ∇₁k_ij / Σ_j k_ij + Σ_j ∇₁k_ij / Σ_l k_jl`.
pub fn blob_grad_log_density<T: Scalar>(
    e: &Ensemble<T>,
    kernel: &KernelConfig<T>,
) -> Result<Array2<T>> {
    let h = kernel.resolve(e.positions().view())?;
    Ok(blob_estimate(e.positions().view(), h))
}

fn blob_estimate<T: Scalar>(positions: ArrayView2<T>, h: T) -> Array2<T> {
    let (n, d) = positions.dim();
    let mut gram = Array2::<T>::zeros((n, n));
    for i in 0..n {
        gram[[i, i]] = T::one();
        for j in i + 1..n {
            let k = (-sq_dist(positions.row(i), positions.row(j)) / h).exp();
            gram[[i, j]] = k;
            gram[[j, i]] = k;
        }
    }
    let mass: Array1<T> = gram.sum_axis(Axis(1));
    let scale = T::lit(2.0) / h;
    let mut out = Array2::zeros((n, d));
    for i in 0..n {
        let xi = positions.row(i);
        let mut row = out.row_mut(i);
        for j in 0..n {
            // ∇₁k(x_i, x_j) = -(2/h)(x_i - x_j) k_ij
            let w = -scale * gram[[i, j]] * (T::one() / mass[i] + T::one() / mass[j]);
            Zip::from(&mut row)
                .and(xi)
                .and(positions.row(j))
                .for_each(|g, &a, &b| *g += w * (a - b));
        }
    }
    out
}

/// `v_i = (A + C)(x_i) (∇log π(x_i) - ĝ_i) + ∇·(A + C)(x_i)` with `ĝ` the Blob estimate.
pub fn parvi_blob_velocity<T: Scalar>(
    e: &Ensemble<T>,
    target: &AugmentedTarget<T>,
    dynamics: &DynamicsSpec<T>,
    kernel: &KernelConfig<T>,
) -> Result<VelocityField<T>> {
    let h = kernel.resolve(e.positions().view())?;
    parvi_blob_velocity_at(e, target, dynamics, h)
}

pub fn parvi_blob_velocity_at<T: Scalar>(
    e: &Ensemble<T>,
    target: &AugmentedTarget<T>,
    dynamics: &DynamicsSpec<T>,
    h: T,
) -> Result<VelocityField<T>> {
    check_setup(e, target, dynamics)?;
    let blob = blob_estimate(e.positions().view(), h);
    let mut values = Array2::zeros(e.positions().raw_dim());
    for i in 0..e.len() {
        let x = e.particle(i);
        let (a, c) = dynamics.ac_unchecked(target, x);
        let score = target.grad_logp(x) - blob.row(i);
        let v = (a + c).dot(&score) + dynamics.divergence_unchecked(target, x);
        if v.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                what: "velocity",
                particle: i,
                iteration: None,
            });
        }
        values.row_mut(i).assign(&v);
    }
    Ok(VelocityField { values })
}

/// One Euler–Maruyama step of every particle:
/// `x ← x + ε f(x) + √(2ε) A(x)^{1/2} ξ`, `ξ ~ N(0, I)`.
///
/// Draws `dim` standard normals per particle, particle by particle. `A` must be
/// diagonal.
pub fn mcmc_step<T: Scalar>(
    e: &Ensemble<T>,
    target: &AugmentedTarget<T>,
    dynamics: &DynamicsSpec<T>,
    eps: T,
    rng: &mut dyn RngCore,
) -> Result<Ensemble<T>> {
    check_setup(e, target, dynamics)?;
    if !(eps >= T::zero()) {
        return Err(Error::arg("step size must be non-negative"));
    }
    let mut next = e.clone();
    next.generation += 1;
    if eps == T::zero() {
        return Ok(next);
    }
    let d = e.dim();
    let two_eps = T::lit(2.0) * eps;
    for i in 0..e.len() {
        let x = e.particle(i);
        let (a, _) = dynamics.ac_unchecked(target, x);
        for r in 0..d {
            for c in 0..d {
                if r != c && a[[r, c]] != T::zero() {
                    return Err(Error::UnsupportedDynamics(
                        "stochastic baseline needs a diagonal diffusion matrix".into(),
                    ));
                }
            }
        }
        let f = dynamics.drift(target, x)?;
        let mut row = next.positions_mut().row_mut(i);
        for k in 0..d {
            let z: f64 = StandardNormal.sample(&mut *rng);
            let sd = (two_eps * a[[k, k]].max(T::zero())).sqrt();
            row[k] += eps * f[k] + sd * T::lit(z);
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                what: "position",
                particle: i,
                iteration: None,
            });
        }
    }
    Ok(next)
}

/// Redraw the momentum block of every particle from `N(0, σ² I)`.
pub fn resample_momentum<T: Scalar>(
    e: &Ensemble<T>,
    sigma2: T,
    rng: &mut dyn RngCore,
) -> Result<Ensemble<T>> {
    if !e.layout().has_momentum() {
        return Err(Error::arg("ensemble has no momentum block"));
    }
    if !(sigma2 > T::zero()) {
        return Err(Error::arg("momentum variance must be positive"));
    }
    let sd = sigma2.sqrt();
    let r = e.layout().r();
    let mut next = e.clone();
    for mut row in next.positions_mut().rows_mut() {
        for k in r.clone() {
            let z: f64 = StandardNormal.sample(&mut *rng);
            row[k] = sd * T::lit(z);
        }
    }
    Ok(next)
}

/// Evaluate a target's score at every particle (used by reference implementations
/// and diagnostics).
pub fn scores<T: Scalar>(e: &Ensemble<T>, target: &dyn TargetDensity<T>) -> Array2<T> {
    let mut out = Array2::zeros(e.positions().raw_dim());
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        row.assign(&target.grad_logp(e.particle(i)));
    }
    out
}
