//! Reference spectral densities from a direct cosine transform of the
//! correlation function, with the harmonic βħω/2 prefactor.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::timeseries::CorrelationSeries;
use crate::units::{
    half_beta_hbar_omega, thermal_beta, wavenumber_to_angular, ANGULAR_PER_WAVENUMBER,
};

/// J(ω) in cm⁻¹ tabulated on a strictly increasing frequency grid (cm⁻¹).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedSpectralDensity {
    frequencies_cm1: Vec<f64>,
    values: Vec<f64>,
    temperature_k: f64,
}

impl TabulatedSpectralDensity {
    pub fn new(frequencies_cm1: Vec<f64>, values: Vec<f64>, temperature_k: f64) -> Result<Self> {
        if frequencies_cm1.len() != values.len() {
            return Err(Error::Dimension {
                expected: frequencies_cm1.len(),
                actual: values.len(),
            });
        }
        check_grid(&frequencies_cm1)?;
        thermal_beta(temperature_k)?;
        Ok(Self {
            frequencies_cm1,
            values,
            temperature_k,
        })
    }

    pub fn frequencies_cm1(&self) -> &[f64] {
        &self.frequencies_cm1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn temperature_k(&self) -> f64 {
        self.temperature_k
    }

    /// Full width at half maximum of the peak nearest `center_cm1`, with
    /// linear interpolation of the half-maximum crossings. `None` if the
    /// peak is not positive or a crossing falls off the grid.
    pub fn fwhm_around(&self, center_cm1: f64) -> Option<f64> {
        let f = &self.frequencies_cm1;
        let v = &self.values;
        if f.is_empty() {
            return None;
        }
        let start = nearest_index(f, center_cm1);
        // climb to the local maximum
        let mut peak = start;
        loop {
            if peak + 1 < v.len() && v[peak + 1] > v[peak] {
                peak += 1;
            } else if peak > 0 && v[peak - 1] > v[peak] {
                peak -= 1;
            } else {
                break;
            }
        }
        let half = 0.5 * v[peak];
        if !(half > 0.0) {
            return None;
        }
        let mut lo = peak;
        while lo > 0 && v[lo] > half {
            lo -= 1;
        }
        let mut hi = peak;
        while hi + 1 < v.len() && v[hi] > half {
            hi += 1;
        }
        if v[lo] > half || v[hi] > half {
            return None;
        }
        let cross = |a: usize, b: usize| f[a] + (half - v[a]) * (f[b] - f[a]) / (v[b] - v[a]);
        Some(cross(hi - 1, hi) - cross(lo, lo + 1))
    }
}

fn nearest_index(grid: &[f64], x: f64) -> usize {
    grid.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(domain("frequency grid contains non-finite values"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("frequency grid must be strictly increasing"));
    }
    Ok(())
}

/// Evenly spaced grid `0, step, 2·step, ...` up to and including `max`
/// (within rounding).
pub fn uniform_grid(max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && max >= 0.0 && max.is_finite()) {
        return Err(domain(format!("invalid grid: max {max}, step {step}")));
    }
    let count = (max / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| i as f64 * step).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Window {
    #[default]
    None,
    /// Half Hann taper: 1 at lag 0, 0 at the last retained lag.
    Hann,
    /// e^{−t/τ}.
    Exponential { tau_fs: f64 },
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::None => write!(f, "none"),
            Window::Hann => write!(f, "hann"),
            Window::Exponential { tau_fs } => write!(f, "exponential({tau_fs})"),
        }
    }
}

impl FromStr for Window {
    type Err = Error;

    /// Accepts `none`, `hann`, `exponential(τ)` and `exp:τ` (τ in fs, `inf` allowed).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let tau = if let Some(rest) = s
            .strip_prefix("exponential(")
            .and_then(|r| r.strip_suffix(')'))
        {
            Some(rest)
        } else {
            s.strip_prefix("exp:")
        };
        match (s.as_str(), tau) {
            ("none", _) => Ok(Window::None),
            ("hann", _) => Ok(Window::Hann),
            (_, Some(t)) => {
                let tau_fs: f64 = t
                    .trim()
                    .parse()
                    .map_err(|_| domain(format!("bad exponential window time {t:?}")))?;
                if !(tau_fs > 0.0) {
                    return Err(domain("exponential window time must be positive"));
                }
                Ok(Window::Exponential { tau_fs })
            }
            _ => Err(domain(format!(
                "unknown window {s:?}; expected none, hann or exponential(tau_fs)"
            ))),
        }
    }
}

pub fn window(corr: &CorrelationSeries, kind: Window) -> CorrelationSeries {
    let n = corr.max_lag();
    let dt = corr.dt_fs();
    match kind {
        Window::None => corr.clone(),
        Window::Hann => corr.map_values(|k, v| {
            if n <= 1 {
                v
            } else {
                v * 0.5 * (1.0 + (PI * k as f64 / (n - 1) as f64).cos())
            }
        }),
        Window::Exponential { tau_fs } => {
            corr.map_values(|k, v| v * (-(k as f64) * dt / tau_fs).exp())
        }
    }
}

/// J(ω_m) = (βħω_m/2)·dt·[C_0 + 2 Σ_{k≥1} C_k cos(ω_m t_k)], converted to cm⁻¹.
pub fn cosine_transform_sd(
    corr: &CorrelationSeries,
    temperature_k: f64,
    freq_grid_cm1: &[f64],
) -> Result<TabulatedSpectralDensity> {
    let beta = thermal_beta(temperature_k)?;
    if corr.is_empty() {
        return Err(domain("cannot transform an empty correlation"));
    }
    check_grid(freq_grid_cm1)?;
    let dt = corr.dt_fs();
    let nyquist = PI / dt;
    if let Some(&bad) = freq_grid_cm1
        .iter()
        .find(|&&nu| wavenumber_to_angular(nu).abs() > nyquist * (1.0 + 1e-12))
    {
        return Err(domain(format!(
            "frequency {bad} cm⁻¹ exceeds the Nyquist limit {:.3} cm⁻¹ of dt = {dt} fs",
            nyquist / ANGULAR_PER_WAVENUMBER
        )));
    }
    let c = corr.values();
    let values = freq_grid_cm1
        .par_iter()
        .map(|&nu| {
            let w = wavenumber_to_angular(nu);
            let tail: f64 = c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &ck)| ck * (w * k as f64 * dt).cos())
                .sum();
            let integral_fs = dt * (c[0] + 2.0 * tail);
            half_beta_hbar_omega(beta, nu) * integral_fs * ANGULAR_PER_WAVENUMBER
        })
        .collect();
    TabulatedSpectralDensity::new(freq_grid_cm1.to_vec(), values, temperature_k)
}
