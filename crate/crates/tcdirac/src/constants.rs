//! Physical constants of a run, Gaussian units.
//!
//! The defaults form a dimensionless desk-scale system: `c = 1`, `m0 = 1`,
//! `e = -1` (electron convention, so `e0 = -e = +1`), with `hbar` left as the
//! free small parameter of the semiclassical expansion.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Speed of light.
    pub c: f64,
    /// Planck constant over 2 pi; the semiclassical small parameter.
    pub hbar: f64,
    /// Rest mass.
    pub m0: f64,
    /// Signed particle charge (electron: e < 0).
    pub e: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants { c: 1.0, hbar: 1e-2, m0: 1.0, e: -1.0 }
    }
}

impl Constants {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.c > 0.0) {
            return Err(format!("c must be positive, got {}", self.c));
        }
        if !(self.m0 > 0.0) {
            return Err(format!("m0 must be positive, got {}", self.m0));
        }
        if !(self.hbar > 0.0) {
            return Err(format!("hbar must be positive, got {}", self.hbar));
        }
        if !self.e.is_finite() {
            return Err("e must be finite".into());
        }
        Ok(())
    }

    /// `e0 = -e`; positive elementary charge in the electron convention.
    pub fn e0(&self) -> f64 {
        -self.e
    }

    /// Bohr magneton `mu0 = hbar e0 / (2 m0 c)`.
    pub fn mu0(&self) -> f64 {
        self.hbar * self.e0() / (2.0 * self.m0 * self.c)
    }

    /// Rest energy `m0 c^2`.
    pub fn rest_energy(&self) -> f64 {
        self.m0 * self.c * self.c
    }

    pub fn with_hbar(self, hbar: f64) -> Self {
        Constants { hbar, ..self }
    }
}
