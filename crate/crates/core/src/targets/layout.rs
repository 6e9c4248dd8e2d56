use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Partition of a state vector into parameter `θ`, momentum `r` and thermostat `ξ`
/// blocks, in that order. `r` and `ξ` may be empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    theta: Range<usize>,
    r: Range<usize>,
    xi: Range<usize>,
}

impl BlockLayout {
    pub fn new(theta_dim: usize, r_dim: usize, xi_dim: usize) -> Result<Self> {
        if theta_dim == 0 {
            return Err(Error::arg("parameter block must be non-empty"));
        }
        Ok(Self {
            theta: 0..theta_dim,
            r: theta_dim..theta_dim + r_dim,
            xi: theta_dim + r_dim..theta_dim + r_dim + xi_dim,
        })
    }

    /// Parameter block only.
    pub fn plain(dim: usize) -> Self {
        Self::new(dim.max(1), 0, 0).expect("non-empty")
    }

    pub fn with_momentum(theta_dim: usize) -> Self {
        Self::new(theta_dim.max(1), theta_dim.max(1), 0).expect("non-empty")
    }

    pub fn with_thermostat(theta_dim: usize) -> Self {
        let d = theta_dim.max(1);
        Self::new(d, d, d).expect("non-empty")
    }

    pub fn theta(&self) -> Range<usize> {
        self.theta.clone()
    }

    pub fn r(&self) -> Range<usize> {
        self.r.clone()
    }

    pub fn xi(&self) -> Range<usize> {
        self.xi.clone()
    }

    pub fn theta_dim(&self) -> usize {
        self.theta.len()
    }

    pub fn has_momentum(&self) -> bool {
        !self.r.is_empty()
    }

    pub fn has_thermostat(&self) -> bool {
        !self.xi.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.xi.end
    }

    /// Coordinates advanced in the half steps of the splitting integrator (`r` then `ξ`).
    pub fn auxiliary(&self) -> Range<usize> {
        self.r.start..self.xi.end
    }
}
