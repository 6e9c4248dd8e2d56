//! Time stepping for particle flows.

use crate::dynamics::DynamicsSpec;
use crate::error::{Error, Result};
use crate::kernels::KernelConfig;
use crate::sampler::{gsvgd_velocity_at, Ensemble, VelocityField};
use crate::scalar::Scalar;
use crate::targets::AugmentedTarget;

fn check_step<T: Scalar>(eps: T) -> Result<()> {
    if !(eps >= T::zero()) || !eps.is_finite() {
        return Err(Error::arg("step size must be a non-negative finite number"));
    }
    Ok(())
}

/// Forward Euler: one velocity evaluation on the current snapshot, then
/// `x ← x + ε v`.
pub fn euler_step<T, F>(e: &Ensemble<T>, velocity: F, eps: T) -> Result<Ensemble<T>>
where
    T: Scalar,
    F: FnOnce(&Ensemble<T>) -> Result<VelocityField<T>>,
{
    check_step(eps)?;
    let mut next = if eps == T::zero() {
        e.clone()
    } else {
        let v = velocity(e)?;
        e.advance(&v, eps, 0..e.dim())?
    };
    next.generation = e.generation + 1;
    Ok(next)
}

/// Leapfrog-style splitting: half step of the auxiliary block (`r`, and `ξ` when
/// present), full step of `θ`, half step of the auxiliary block. Each sub-step
/// re-evaluates the full velocity on the updated snapshot and keeps only the
/// components of the block being advanced.
pub fn split_step_with<T, F>(e: &Ensemble<T>, mut velocity: F, eps: T) -> Result<Ensemble<T>>
where
    T: Scalar,
    F: FnMut(&Ensemble<T>) -> Result<VelocityField<T>>,
{
    check_step(eps)?;
    let layout = e.layout().clone();
    if !layout.has_momentum() {
        return Err(Error::arg("symmetric splitting needs a momentum block"));
    }
    if eps == T::zero() {
        let mut next = e.clone();
        next.generation += 1;
        return Ok(next);
    }
    let half = eps / T::lit(2.0);
    let aux = layout.auxiliary();
    let v = velocity(e)?;
    let mid = e.advance(&v, half, aux.clone())?;
    let v = velocity(&mid)?;
    let moved = mid.advance(&v, eps, layout.theta())?;
    let v = velocity(&moved)?;
    let mut next = moved.advance(&v, half, aux)?;
    next.generation = e.generation + 1;
    Ok(next)
}

/// Symmetric splitting of the GSVGD flow. The bandwidth is resolved once from
/// the incoming ensemble and shared by all three sub-steps.
pub fn symmetric_split_step<T: Scalar>(
    e: &Ensemble<T>,
    target: &AugmentedTarget<T>,
    dynamics: &DynamicsSpec<T>,
    kernel: &KernelConfig<T>,
    eps: T,
) -> Result<Ensemble<T>> {
    let h = kernel.resolve(e.positions().view())?;
    split_step_with(e, |snap| gsvgd_velocity_at(snap, target, dynamics, h), eps)
}
