//! Synthetic ground truth: damped-cosine correlation functions and Gaussian
//! gap trajectories with a known atom content.
//!
//! Randomness comes from ChaCha8 (a counter-based stream generator) seeded
//! with `rng_seed`, and normal deviates from `rand_distr::StandardNormal`,
//! so a given seed produces the same output on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::atom::Atom;
use crate::error::{domain, Result};
use crate::timeseries::{CorrelationSeries, GapTrajectory};
use crate::units::wavenumber_to_angular;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub atoms: Vec<Atom>,
    pub n_samples: usize,
    pub dt_fs: f64,
    /// Noise standard deviation as a fraction of the noiseless C_0.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl SynthSpec {
    pub fn noiseless(atoms: Vec<Atom>, n_samples: usize, dt_fs: f64) -> Self {
        Self {
            atoms,
            n_samples,
            dt_fs,
            noise_sigma: 0.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(domain("n_samples must be positive"));
        }
        if !(self.dt_fs > 0.0 && self.dt_fs.is_finite()) {
            return Err(domain(format!("dt must be positive, got {}", self.dt_fs)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(domain(format!(
                "noise_sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        for a in &self.atoms {
            a.validate()?;
        }
        Ok(())
    }

    /// Noiseless Σ_m a_m e^{−γ_m t} cos(Ω_m t) at a single time.
    pub fn target_at(&self, t_fs: f64) -> f64 {
        self.atoms.iter().map(|a| a.time_value(t_fs)).sum()
    }

    /// Whether every atom sits on the given grid (within 1e-9 cm⁻¹).
    pub fn on_grid(&self, gammas: &[f64], omegas: &[f64]) -> bool {
        let hit = |v: f64, grid: &[f64]| grid.iter().any(|g| (g - v).abs() < 1e-9);
        self.atoms
            .iter()
            .all(|a| hit(a.gamma_cm1, gammas) && hit(a.omega_cm1, omegas))
    }
}

pub fn synth_correlation(spec: &SynthSpec) -> Result<CorrelationSeries> {
    spec.validate()?;
    let mut values: Vec<f64> = (0..spec.n_samples)
        .map(|k| spec.target_at(k as f64 * spec.dt_fs))
        .collect();
    if spec.noise_sigma > 0.0 {
        let c0 = spec.target_at(0.0);
        let sigma = spec.noise_sigma * c0;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        for v in values.iter_mut() {
            let xi: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * xi;
        }
    }
    CorrelationSeries::new(values, spec.dt_fs)
}

/// Stationary Gaussian gap process with autocovariance Σ_m a_m e^{−γ_m|t|}cos(Ω_m t),
/// generated by random-phase spectral synthesis on a periodic grid long
/// enough that the target has decayed across half a period. `noise_sigma`
/// adds white noise (fraction of √C_0) on top.
pub fn synth_gap_trajectory(spec: &SynthSpec, n_steps: usize) -> Result<GapTrajectory> {
    spec.validate()?;
    if n_steps < 2 {
        return Err(domain("a gap trajectory needs at least 2 steps"));
    }
    let len = circulant_length(spec, n_steps);
    let autocov: Vec<f64> = (0..len)
        .map(|k| {
            let lag = k.min(len - k);
            spec.target_at(lag as f64 * spec.dt_fs)
        })
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(len);
    let mut spectrum: Vec<Complex64> = autocov.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    fft.process(&mut spectrum);

    // x_n = Σ_k sqrt(S_k/L)(a_k + i b_k) e^{2πikn/L}, keep the real part:
    // E[x_n x_{n+m}] = (1/L) Σ_k S_k cos(2πkm/L) = c_m.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut buf: Vec<Complex64> = spectrum
        .iter()
        .map(|s| {
            let weight = (s.re.max(0.0) / len as f64).sqrt();
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(weight * a, weight * b)
        })
        .collect();
    let ifft = planner.plan_fft_inverse(len);
    ifft.process(&mut buf);

    let white = spec.noise_sigma * spec.target_at(0.0).max(0.0).sqrt();
    let samples = buf[..n_steps]
        .iter()
        .map(|z| {
            if white > 0.0 {
                let xi: f64 = StandardNormal.sample(&mut rng);
                z.re + white * xi
            } else {
                z.re
            }
        })
        .collect();
    GapTrajectory::new(samples, spec.dt_fs, "synthetic")
}

fn circulant_length(spec: &SynthSpec, n_steps: usize) -> usize {
    // Half a period must cover ~40 decay times of the slowest atom, capped so
    // undamped atoms do not demand unbounded memory.
    let slowest = spec
        .atoms
        .iter()
        .map(|a| wavenumber_to_angular(a.gamma_cm1))
        .fold(f64::INFINITY, f64::min);
    let decay_steps = if slowest.is_finite() && slowest > 0.0 {
        (40.0 / (slowest * spec.dt_fs)).ceil() as usize
    } else {
        n_steps
    };
    let half = n_steps.max(decay_steps.min(8 * n_steps));
    (2 * half).next_power_of_two()
}
