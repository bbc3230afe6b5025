//! Physical constants and unit conversions.
//!
//! Internally time is measured in femtoseconds and angular frequency in
//! rad/fs, with ħ = 1 so that energies are angular frequencies. Files and
//! command-line flags use wavenumbers (cm⁻¹) for both frequencies and
//! energies, and kelvin for temperature. Every conversion between the two
//! goes through this module.

use std::f64::consts::PI;

use crate::error::{domain, Result};

/// Speed of light in cm/fs.
pub const SPEED_OF_LIGHT_CM_PER_FS: f64 = 2.99792458e-5;

/// Boltzmann constant in cm⁻¹/K.
pub const BOLTZMANN_CM1_PER_K: f64 = 0.69503476;

/// rad/fs per cm⁻¹, i.e. 2πc.
pub const ANGULAR_PER_WAVENUMBER: f64 = 2.0 * PI * SPEED_OF_LIGHT_CM_PER_FS;

pub fn wavenumber_to_angular(nu_cm1: f64) -> f64 {
    nu_cm1 * ANGULAR_PER_WAVENUMBER
}

pub fn angular_to_wavenumber(omega_rad_fs: f64) -> f64 {
    omega_rad_fs / ANGULAR_PER_WAVENUMBER
}

/// Inverse thermal energy β = 1/(k_B T) in cm (inverse wavenumbers).
pub fn thermal_beta(temperature_k: f64) -> Result<f64> {
    if !(temperature_k > 0.0) {
        return Err(domain(format!(
            "temperature must be positive, got {temperature_k} K"
        )));
    }
    Ok(1.0 / (BOLTZMANN_CM1_PER_K * temperature_k))
}

/// Dimensionless βħω/2 for a frequency given in cm⁻¹.
pub fn half_beta_hbar_omega(beta_cm: f64, nu_cm1: f64) -> f64 {
    0.5 * beta_cm * nu_cm1
}

/// Converts a squared energy (e.g. a gap correlation) from cm⁻² to (rad/fs)².
pub fn energy_squared_to_angular(value_cm2: f64) -> f64 {
    value_cm2 * ANGULAR_PER_WAVENUMBER * ANGULAR_PER_WAVENUMBER
}
