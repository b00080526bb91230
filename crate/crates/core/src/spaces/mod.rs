//! Discrete spaces: `H(div)` velocity (RT/BDM), tangential edge multipliers,
//! discontinuous pressure, and elementwise traceless stress.

mod multiplier;
mod pressure;
mod stress;
mod velocity;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use multiplier::{edge_moments, MultiplierSpace};
pub use pressure::PressureSpace;
pub use stress::{
    interpolate_stress, l2_project_traceless, tn_dof_matrix, tn_dofs, traceless_mass,
};
pub use velocity::{
    apply_velocity_dofs, interior_test_count, VelocityElement, VelocitySpace,
};

/// Polynomial degrees of the velocity/pressure pair: `l == k` selects
/// `RT_k`, `l == k - 1` selects `BDM_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub k: usize,
    pub l: usize,
}

impl SpaceConfig {
    /// Largest velocity degree with tabulated support.
    pub const MAX_K: usize = 2;

    pub fn new(k: usize, l: usize) -> Result<Self> {
        if k > Self::MAX_K {
            return Err(Error::InvalidConfig(format!(
                "k = {k} exceeds the supported maximum {}",
                Self::MAX_K
            )));
        }
        if l != k && l + 1 != k {
            return Err(Error::InvalidConfig(format!(
                "l = {l} must equal k = {k} or k - 1"
            )));
        }
        Ok(Self { k, l })
    }

    pub fn is_raviart_thomas(&self) -> bool {
        self.l == self.k
    }

    /// The Raviart–Thomas configuration of the same degree.
    pub fn raviart_thomas(&self) -> Self {
        Self { k: self.k, l: self.k }
    }

    pub fn name(&self) -> String {
        if self.is_raviart_thomas() {
            format!("RT{}", self.k)
        } else {
            format!("BDM{}", self.k)
        }
    }
}
