//! The damped-cosine atom shared by the dictionary, the solver output and
//! the closed-form bath model.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::units::wavenumber_to_angular;

/// One term a·e^{−γt}cos(Ωt) of a correlation function. `gamma_cm1` and
/// `omega_cm1` are in wavenumbers; `amplitude` carries the units of the
/// correlation function (cm⁻²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub gamma_cm1: f64,
    pub omega_cm1: f64,
    pub amplitude: f64,
}

impl Atom {
    pub fn new(gamma_cm1: f64, omega_cm1: f64, amplitude: f64) -> Self {
        Self {
            gamma_cm1,
            omega_cm1,
            amplitude,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_cm1 >= 0.0 && self.gamma_cm1.is_finite()) {
            return Err(domain(format!(
                "atom damping must be >= 0, got {}",
                self.gamma_cm1
            )));
        }
        if !(self.omega_cm1 >= 0.0 && self.omega_cm1.is_finite()) {
            return Err(domain(format!(
                "atom frequency must be >= 0, got {}",
                self.omega_cm1
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(domain("atom amplitude must be finite"));
        }
        Ok(())
    }

    /// a·e^{−γ|t|}cos(Ωt) with t in fs.
    pub fn time_value(&self, t_fs: f64) -> f64 {
        let g = wavenumber_to_angular(self.gamma_cm1);
        let w = wavenumber_to_angular(self.omega_cm1);
        self.amplitude * (-g * t_fs.abs()).exp() * (w * t_fs).cos()
    }
}
