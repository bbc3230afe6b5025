//! Closed-form Drude-Lorentz spectral density built from recovered atoms, its
//! reorganization energy, and the finite-temperature bath kernel
//!
//! ```text
//! D(t) = (1/π) ∫₀^{ω_max} dω J(ω) [coth(βħω/2) cos(ωt) − i sin(ωt)]
//! ```
//!
//! Frequencies are in cm⁻¹, J in cm⁻¹, D in cm⁻² (multiply by
//! [`units::energy_squared_to_angular`] for rad²/fs²). Each atom contributes
//!
//! ```text
//! J(ω) = a · (βω/2) · [γ/(γ² + (ω−Ω)²) + γ/(γ² + (ω+Ω)²)]
//! ```
//!
//! which is the cosine transform of a·e^{−γ|t|}cos(Ωt) with the same
//! normalization as [`baseline::cosine_transform_sd`](crate::baseline::cosine_transform_sd).
//! With the 1/π in D, Re D(t) tends to the classical correlation function
//! at high temperature.

use log::{debug, warn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atom::Atom;
use crate::baseline::TabulatedSpectralDensity;
use crate::error::{domain, Error, Result};
use crate::quadrature;
use crate::solver::SparseSpectrum;
use crate::units::{self, thermal_beta, SPEED_OF_LIGHT_CM_PER_FS};

/// Width given to γ = 0 atoms so the closed form stays integrable.
pub const MIN_GAMMA_CM1: f64 = 1.0;

pub const DEFAULT_OMEGA_MAX_CM1: f64 = 4000.0;

const MAX_PANELS: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct DrudeLorentzModel {
    atoms: Vec<Atom>,
    temperature_k: f64,
    #[serde(skip)]
    beta_cm: f64,
}

#[derive(Deserialize)]
struct RawModel {
    atoms: Vec<Atom>,
    temperature_k: f64,
}

impl TryFrom<RawModel> for DrudeLorentzModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        Self::new(raw.atoms, raw.temperature_k)
    }
}

/// x·coth(x), with its series near 0.
fn x_coth_x(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * x / 3.0
    } else {
        x / x.tanh()
    }
}

impl DrudeLorentzModel {
    pub fn new(atoms: Vec<Atom>, temperature_k: f64) -> Result<Self> {
        let beta_cm = thermal_beta(temperature_k)?;
        let mut kept = Vec::with_capacity(atoms.len());
        for mut atom in atoms {
            atom.validate()?;
            if atom.gamma_cm1 == 0.0 {
                warn!(
                    "atom at omega = {} cm-1 has gamma = 0; using gamma = {MIN_GAMMA_CM1} cm-1",
                    atom.omega_cm1
                );
                atom.gamma_cm1 = MIN_GAMMA_CM1;
            }
            kept.push(atom);
        }
        Ok(Self {
            atoms: kept,
            temperature_k,
            beta_cm,
        })
    }

    pub fn from_spectrum(spectrum: &SparseSpectrum, temperature_k: f64) -> Result<Self> {
        Self::new(spectrum.atoms.clone(), temperature_k)
    }

    /// Parses `{"atoms": [...], "temperature_k": T}`; extra fields (such as
    /// solver diagnostics) are ignored.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn temperature_k(&self) -> f64 {
        self.temperature_k
    }

    /// β in cm (1/k_BT with k_BT in cm⁻¹).
    pub fn beta_cm(&self) -> f64 {
        self.beta_cm
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Same atoms with every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.amplitude *= factor;
        }
        out
    }

    /// Σ a[γ/(γ²+(ω−Ω)²) + γ/(γ²+(ω+Ω)²)], so that J = (βω/2)·pair.
    fn lorentz_pair(&self, nu: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| {
                let g = a.gamma_cm1;
                let lo = nu - a.omega_cm1;
                let hi = nu + a.omega_cm1;
                a.amplitude * (g / (g * g + lo * lo) + g / (g * g + hi * hi))
            })
            .sum()
    }

    /// J(ω) in cm⁻¹ for ω in cm⁻¹. Odd in ω.
    pub fn evaluate_sd(&self, omega_cm1: f64) -> f64 {
        units::half_beta_hbar_omega(self.beta_cm, omega_cm1) * self.lorentz_pair(omega_cm1)
    }

    /// Panel boundaries on [0, upper] resolving every Lorentzian and, for
    /// t > 0, the oscillation period 1/(c t) of the kernel integrand.
    fn breakpoints(&self, upper: f64, t_fs: f64) -> Vec<f64> {
        let mut pts = vec![0.0, upper];
        for a in &self.atoms {
            for k in [0.0, 1.0, 3.0, 10.0, 30.0, 100.0] {
                for p in [a.omega_cm1 - k * a.gamma_cm1, a.omega_cm1 + k * a.gamma_cm1] {
                    if p > 0.0 && p < upper {
                        pts.push(p);
                    }
                }
            }
        }
        let mut width = upper / 8.0;
        if t_fs > 0.0 {
            width = width.min(1.0 / (SPEED_OF_LIGHT_CM_PER_FS * t_fs));
        }
        let n = (upper / width).ceil() as usize;
        pts.extend((1..n).map(|k| k as f64 * upper / n as f64));
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * upper);
        pts
    }

    /// λ = (1/π)∫₀^∞ J(ω)/ω dω in cm⁻¹: adaptive quadrature on
    /// [0, DEFAULT_OMEGA_MAX_CM1] plus the exact arctangent tail beyond it.
    pub fn reorganization_energy(&self) -> Result<f64> {
        if self.atoms.is_empty() {
            return Ok(0.0);
        }
        let upper = DEFAULT_OMEGA_MAX_CM1;
        let half_beta = 0.5 * self.beta_cm;
        let rel_tol = 1e-10;
        let est = quadrature::integrate(
            |nu| Complex64::new(half_beta * self.lorentz_pair(nu), 0.0),
            &self.breakpoints(upper, 0.0),
            rel_tol,
            0.0,
            MAX_PANELS,
        );
        let tail: f64 = self
            .atoms
            .iter()
            .map(|a| {
                let g = a.gamma_cm1;
                let pi = std::f64::consts::PI;
                half_beta
                    * a.amplitude
                    * (pi - ((upper - a.omega_cm1) / g).atan() - ((upper + a.omega_cm1) / g).atan())
            })
            .sum();
        let value = (est.value.re + tail) / std::f64::consts::PI;
        let achieved = est.abs_error / (std::f64::consts::PI * value.abs().max(f64::MIN_POSITIVE));
        if achieved > 1e-8 {
            return Err(Error::Quadrature {
                achieved,
                wanted: 1e-8,
            });
        }
        Ok(value)
    }
}

/// Settings of the kernel integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelParams {
    /// Upper limit of the frequency integral, cm⁻¹.
    pub omega_max_cm1: f64,
    /// Temperature of the coth factor; the model temperature when `None`.
    pub temperature_k: Option<f64>,
    pub rel_tol: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            omega_max_cm1: DEFAULT_OMEGA_MAX_CM1,
            temperature_k: None,
            rel_tol: 1e-10,
        }
    }
}

impl KernelParams {
    fn validate(&self) -> Result<()> {
        if !(self.omega_max_cm1 > 0.0 && self.omega_max_cm1.is_finite()) {
            return Err(domain(format!(
                "omega_max must be positive, got {}",
                self.omega_max_cm1
            )));
        }
        if !(self.rel_tol > 0.0) {
            return Err(domain("rel_tol must be positive"));
        }
        Ok(())
    }
}

/// D(t) in cm⁻² by adaptive Gauss–Kronrod quadrature.
pub fn bath_kernel(
    model: &DrudeLorentzModel,
    t_fs: f64,
    params: &KernelParams,
) -> Result<Complex64> {
    kernel_with_derivative(model, t_fs, params, false).map(|(d, _)| d)
}

/// D(t) and, if asked, dD/dt (cm⁻²/fs).
fn kernel_with_derivative(
    model: &DrudeLorentzModel,
    t_fs: f64,
    params: &KernelParams,
    derivative: bool,
) -> Result<(Complex64, Complex64)> {
    params.validate()?;
    if !(t_fs >= 0.0 && t_fs.is_finite()) {
        return Err(domain(format!("kernel time must be >= 0, got {t_fs}")));
    }
    let kernel_beta = match params.temperature_k {
        Some(t) => thermal_beta(t)?,
        None => model.beta_cm,
    };
    let zero = Complex64::new(0.0, 0.0);
    if model.is_empty() {
        return Ok((zero, zero));
    }
    // J coth(β'ω/2) = (β/β')·pair·x coth x with x = β'ω/2
    let ratio = model.beta_cm / kernel_beta;
    let breaks = model.breakpoints(params.omega_max_cm1, t_fs);
    let value = quadrature::integrate(
        |nu| {
            let pair = model.lorentz_pair(nu);
            let (s, c) = (units::wavenumber_to_angular(nu) * t_fs).sin_cos();
            let re = ratio * pair * x_coth_x(0.5 * kernel_beta * nu) * c;
            let im = -0.5 * model.beta_cm * nu * pair * s;
            Complex64::new(re, im)
        },
        &breaks,
        params.rel_tol,
        0.0,
        MAX_PANELS,
    );
    check_convergence(value, params, t_fs);
    let mut slope = zero;
    if derivative {
        let est = quadrature::integrate(
            |nu| {
                let w = units::wavenumber_to_angular(nu);
                let pair = model.lorentz_pair(nu);
                let (s, c) = (w * t_fs).sin_cos();
                let re = -ratio * pair * x_coth_x(0.5 * kernel_beta * nu) * w * s;
                let im = -0.5 * model.beta_cm * nu * pair * w * c;
                Complex64::new(re, im)
            },
            &breaks,
            params.rel_tol,
            0.0,
            MAX_PANELS,
        );
        check_convergence(est, params, t_fs);
        slope = est.value / std::f64::consts::PI;
    }
    Ok((value.value / std::f64::consts::PI, slope))
}

fn check_convergence(est: quadrature::Estimate, params: &KernelParams, t_fs: f64) {
    let achieved = est.abs_error / est.value.norm().max(f64::MIN_POSITIVE);
    if achieved > params.rel_tol && est.abs_error > 1e-300 {
        warn!(
            "kernel quadrature at t = {t_fs} fs reached relative error {achieved:.1e} (wanted {:.1e})",
            params.rel_tol
        );
    } else {
        debug!("kernel at t = {t_fs} fs: {} evaluations", est.evaluations);
    }
}

/// Largest frequency step of [`kernel_series`], cm⁻¹.
const SERIES_FREQ_STEP: f64 = 0.1;

/// D(k·step) for k = 0..n by the trapezoid rule on a uniform frequency
/// grid. The integrand is even in ω and analytic in a strip of half-width
/// min γ around the real axis, so the rule converges exponentially; with
/// the step below min(γ)/5 it agrees with [`bath_kernel`] to quadrature
/// tolerance. Cost is O(atoms·grid + n·grid) instead of O(n·atoms·panels).
pub fn kernel_series(
    model: &DrudeLorentzModel,
    n: usize,
    step_fs: f64,
    params: &KernelParams,
) -> Result<Vec<Complex64>> {
    params.validate()?;
    if !(step_fs > 0.0 && step_fs.is_finite()) {
        return Err(domain(format!(
            "kernel step must be positive, got {step_fs}"
        )));
    }
    if model.is_empty() || n == 0 {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }
    let kernel_beta = match params.temperature_k {
        Some(t) => thermal_beta(t)?,
        None => model.beta_cm,
    };
    let ratio = model.beta_cm / kernel_beta;
    let t_max = (n - 1) as f64 * step_fs;
    let gamma_min = model
        .atoms
        .iter()
        .map(|a| a.gamma_cm1)
        .fold(f64::INFINITY, f64::min);
    let mut h = SERIES_FREQ_STEP.min(gamma_min / 5.0);
    if t_max > 0.0 {
        h = h.min(1.0 / (40.0 * SPEED_OF_LIGHT_CM_PER_FS * t_max));
    }
    let upper = params.omega_max_cm1;
    let m = (upper / h).ceil() as usize;
    let h = upper / m as f64;
    // unweighted integrand amplitudes: Re part × cos, Im part × sin
    let amps: Vec<(f64, f64)> = (0..=m)
        .into_par_iter()
        .map(|j| {
            let nu = j as f64 * h;
            let pair = model.lorentz_pair(nu);
            (
                ratio * pair * x_coth_x(0.5 * kernel_beta * nu),
                -0.5 * model.beta_cm * nu * pair,
            )
        })
        .collect();
    const RESEED: usize = 256;
    Ok((0..n)
        .into_par_iter()
        .map(|k| {
            let phi = units::wavenumber_to_angular(h) * k as f64 * step_fs;
            let rot = Complex64::from_polar(1.0, phi);
            let mut z = Complex64::new(1.0, 0.0);
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &(a, b)) in amps.iter().enumerate() {
                if j % RESEED == 0 {
                    z = Complex64::from_polar(1.0, phi * j as f64);
                }
                let w = if j == 0 || j == m { 0.5 } else { 1.0 };
                re += w * a * z.re;
                im += w * b * z.im;
                z *= rot;
            }
            // Euler–Maclaurin end correction −h²/12·f'(upper); f'(0) = 0 by parity
            let f = |j: usize| {
                let z = Complex64::from_polar(1.0, phi * j as f64);
                Complex64::new(amps[j].0 * z.re, amps[j].1 * z.im)
            };
            let slope = if m >= 2 {
                (f(m) * 3.0 - f(m - 1) * 4.0 + f(m - 2)) / (2.0 * h)
            } else {
                Complex64::new(0.0, 0.0)
            };
            (Complex64::new(re, im) * h - slope * (h * h / 12.0)) / std::f64::consts::PI
        })
        .collect())
}

/// D(t) for a tabulated spectral density by the trapezoid rule over its
/// grid, at the temperature stored with the table.
pub fn tabulated_kernel(sd: &TabulatedSpectralDensity, t_fs: f64) -> Result<Complex64> {
    if !(t_fs >= 0.0 && t_fs.is_finite()) {
        return Err(domain(format!("kernel time must be >= 0, got {t_fs}")));
    }
    let beta = thermal_beta(sd.temperature_k())?;
    let nus = sd.frequencies_cm1();
    let js = sd.values();
    let integrand = |k: usize| -> Complex64 {
        let nu = nus[k];
        let x = 0.5 * beta * nu;
        let j_coth = if x.abs() < 1e-12 {
            // J ~ J'(0)ω near zero, so J coth → 2J'(0)/β
            neighbor_slope(nus, js, k) * 2.0 / beta
        } else {
            js[k] / x.tanh()
        };
        let (s, c) = (units::wavenumber_to_angular(nu) * t_fs).sin_cos();
        Complex64::new(j_coth * c, -js[k] * s)
    };
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 1..nus.len() {
        sum += (integrand(k - 1) + integrand(k)) * (0.5 * (nus[k] - nus[k - 1]));
    }
    Ok(sum / std::f64::consts::PI)
}

fn neighbor_slope(nus: &[f64], js: &[f64], k: usize) -> f64 {
    let n = if k + 1 < nus.len() {
        k + 1
    } else {
        k.saturating_sub(1)
    };
    if n == k {
        return 0.0;
    }
    (js[n] - js[k]) / (nus[n] - nus[k])
}

/// Samples of D(t) on a uniform grid with cubic Hermite interpolation
/// between them.
#[derive(Debug, Clone)]
pub struct BathKernel {
    model: DrudeLorentzModel,
    params: KernelParams,
    dt_fs: f64,
    values: Vec<Complex64>,
    slopes: Vec<Complex64>,
}

/// Tabulates D and dD/dt at t = 0, dt, ..., covering [0, t_max].
pub fn tabulate_kernel(
    model: &DrudeLorentzModel,
    t_max_fs: f64,
    dt_fs: f64,
    params: &KernelParams,
) -> Result<BathKernel> {
    if !(dt_fs > 0.0 && dt_fs.is_finite()) {
        return Err(domain(format!("dt must be positive, got {dt_fs}")));
    }
    if !(t_max_fs >= dt_fs && t_max_fs.is_finite()) {
        return Err(domain(format!("t_max must be >= dt, got {t_max_fs}")));
    }
    let n = (t_max_fs / dt_fs - 1e-9).ceil() as usize + 1;
    let samples: Vec<(Complex64, Complex64)> = (0..n)
        .into_par_iter()
        .map(|k| kernel_with_derivative(model, k as f64 * dt_fs, params, true))
        .collect::<Result<_>>()?;
    let (values, slopes) = samples.into_iter().unzip();
    Ok(BathKernel {
        model: model.clone(),
        params: *params,
        dt_fs,
        values,
        slopes,
    })
}

impl BathKernel {
    pub fn model(&self) -> &DrudeLorentzModel {
        &self.model
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn dt_fs(&self) -> f64 {
        self.dt_fs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t_max_fs(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt_fs
    }

    pub fn times_fs(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|k| k as f64 * self.dt_fs)
            .collect()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.values
    }

    /// Interpolated D(t) for 0 ≤ t ≤ t_max.
    pub fn at(&self, t_fs: f64) -> Result<Complex64> {
        if !(t_fs >= 0.0 && t_fs <= self.t_max_fs() * (1.0 + 1e-12)) {
            return Err(domain(format!(
                "t = {t_fs} fs outside the tabulated range [0, {}]",
                self.t_max_fs()
            )));
        }
        let pos = t_fs / self.dt_fs;
        let k = (pos.floor() as usize).min(self.values.len() - 2);
        let s = pos - k as f64;
        let h = self.dt_fs;
        let (p0, p1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        Ok(p0 * (2.0 * s3 - 3.0 * s2 + 1.0)
            + m0 * (s3 - 2.0 * s2 + s)
            + p1 * (-2.0 * s3 + 3.0 * s2)
            + m1 * (s3 - s2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::{cosine_transform_sd, TabulatedSpectralDensity};
    use crate::synth::{synth_correlation, SynthSpec};
    use proptest::prelude::*;

    fn model(atoms: &[(f64, f64, f64)], t: f64) -> DrudeLorentzModel {
        DrudeLorentzModel::new(
            atoms.iter().map(|&(g, w, a)| Atom::new(g, w, a)).collect(),
            t,
        )
        .unwrap()
    }

    #[test]
    fn sd_vanishes_at_zero() {
        let m = model(&[(30.0, 200.0, 1000.0), (5.0, 0.0, 10.0)], 77.0);
        assert_eq!(m.evaluate_sd(0.0), 0.0);
    }

    #[test]
    fn sd_matches_direct_formula() {
        let m = model(&[(30.0, 200.0, 1000.0)], 77.0);
        let beta = 1.0 / (0.69503476 * 77.0);
        let w = 200.0;
        let direct = 1000.0 * beta * w / 2.0 * (30.0 / (900.0) + 30.0 / (900.0 + 400.0 * 400.0));
        assert!((m.evaluate_sd(w) - direct).abs() <= 1e-13 * direct);
    }

    proptest! {
        #[test]
        fn sd_is_odd(w in -3000.0f64..3000.0) {
            let m = model(&[(30.0, 200.0, 1000.0), (6.0, 520.0, -40.0)], 300.0);
            prop_assert!((m.evaluate_sd(-w) + m.evaluate_sd(w)).abs() <= 1e-12 * m.evaluate_sd(w).abs().max(1e-300));
        }
    }

    #[test]
    fn zero_gamma_is_widened() {
        let m = model(&[(0.0, 100.0, 1.0)], 77.0);
        assert_eq!(m.atoms()[0].gamma_cm1, MIN_GAMMA_CM1);
    }

    #[test]
    fn bad_temperature_rejected() {
        assert!(DrudeLorentzModel::new(vec![], 0.0).is_err());
        assert!(DrudeLorentzModel::new(vec![], -5.0).is_err());
    }

    #[test]
    fn json_roundtrip_ignores_extra_fields() {
        let text = r#"{"atoms":[{"gamma_cm1":30.0,"omega_cm1":200.0,"amplitude":2.0}],
                       "residual_norm":1e-9,"temperature_k":77.0}"#;
        let m = DrudeLorentzModel::from_json(text).unwrap();
        assert_eq!(m.atoms().len(), 1);
        let back = DrudeLorentzModel::from_json(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn reorganization_energy_properties() {
        assert_eq!(model(&[], 77.0).reorganization_energy().unwrap(), 0.0);
        let m = model(&[(30.0, 200.0, 1000.0), (12.0, 60.0, 300.0)], 77.0);
        let l = m.reorganization_energy().unwrap();
        let l2 = m.scaled(2.0).reorganization_energy().unwrap();
        assert!((l2 - 2.0 * l).abs() <= 1e-12 * l);
        // (1/π)(β/2)Σa·π
        let closed = m.beta_cm() * 1300.0 / 2.0;
        assert!((l - closed).abs() <= 1e-8 * closed, "{l} vs {closed}");
    }

    #[test]
    fn reorganization_energy_vs_trapezoid() {
        let m = model(&[(18.0, 150.0, 500.0)], 77.0);
        // J/ω = (β/2)·pair on [0, 4000] with 10⁶ points, plus the same tail
        let n = 1_000_000;
        let h = DEFAULT_OMEGA_MAX_CM1 / n as f64;
        let f = |nu: f64| 0.5 * m.beta_cm() * m.lorentz_pair(nu);
        let mut sum = 0.5 * (f(0.0) + f(DEFAULT_OMEGA_MAX_CM1));
        for k in 1..n {
            sum += f(k as f64 * h);
        }
        let (g, w, a) = (18.0f64, 150.0f64, 500.0f64);
        let tail = 0.5
            * m.beta_cm()
            * a
            * (std::f64::consts::PI - ((4000.0 - w) / g).atan() - ((4000.0 + w) / g).atan());
        let oracle = (sum * h + tail) / std::f64::consts::PI;
        let l = m.reorganization_energy().unwrap();
        assert!((l - oracle).abs() <= 1e-6 * oracle, "{l} vs {oracle}");
    }

    #[test]
    fn closed_form_matches_cosine_transform() {
        let atom = Atom::new(30.0, 200.0, 1.0);
        let corr = synth_correlation(&SynthSpec::noiseless(vec![atom], 40_000, 0.25)).unwrap();
        let grid: Vec<f64> = (0..=60).map(|k| 110.0 + 3.0 * k as f64).collect();
        let numeric: TabulatedSpectralDensity = cosine_transform_sd(&corr, 300.0, &grid).unwrap();
        let m = model(&[(30.0, 200.0, 1.0)], 300.0);
        for (w, j) in grid.iter().zip(numeric.values()) {
            let exact = m.evaluate_sd(*w);
            assert!((j - exact).abs() <= 1e-3 * exact, "w = {w}: {j} vs {exact}");
        }
    }

    #[test]
    fn kernel_at_zero_is_real_and_positive() {
        let m = model(&[(30.0, 200.0, 1000.0)], 77.0);
        let d0 = bath_kernel(&m, 0.0, &KernelParams::default()).unwrap();
        assert_eq!(d0.im, 0.0);
        assert!(d0.re > 0.0);
    }

    #[test]
    fn empty_model_has_zero_kernel() {
        let m = model(&[], 77.0);
        let k = tabulate_kernel(&m, 10.0, 1.0, &KernelParams::default()).unwrap();
        assert!(k.samples().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn kernel_rejects_bad_input() {
        let m = model(&[(30.0, 200.0, 1000.0)], 77.0);
        assert!(bath_kernel(&m, -1.0, &KernelParams::default()).is_err());
        let p = KernelParams {
            temperature_k: Some(0.0),
            ..KernelParams::default()
        };
        assert!(bath_kernel(&m, 1.0, &p).is_err());
    }

    #[test]
    fn tabulation_sample_count() {
        let m = model(&[(30.0, 200.0, 1000.0)], 77.0);
        let k = tabulate_kernel(&m, 2.0, 2.0, &KernelParams::default()).unwrap();
        assert_eq!(k.len(), 2);
        assert_eq!(k.times_fs(), vec![0.0, 2.0]);
    }

    #[test]
    fn interpolation_matches_direct_evaluation() {
        let m = model(
            &[
                (30.0, 200.0, 1000.0),
                (12.0, 60.0, 300.0),
                (6.0, 520.0, 100.0),
            ],
            77.0,
        );
        let p = KernelParams::default();
        let k = tabulate_kernel(&m, 40.0, 0.1, &p).unwrap();
        for t in [0.05, 3.33, 17.875, 39.95] {
            let direct = bath_kernel(&m, t, &p).unwrap();
            let interp = k.at(t).unwrap();
            assert!(
                (interp - direct).norm() <= 1e-8 * direct.norm(),
                "t = {t}: {interp} vs {direct}"
            );
        }
        assert!(k.at(41.0).is_err());
    }

    #[test]
    fn kernel_matches_sampled_definition() {
        // Re D even / Im D odd by construction: compare with the definition at
        // a few t via a plain trapezoid on a fine grid.
        let m = model(&[(30.0, 200.0, 1000.0)], 300.0);
        let p = KernelParams::default();
        for t in [5.0, 50.0] {
            let d = bath_kernel(&m, t, &p).unwrap();
            let n = 400_000;
            let h = p.omega_max_cm1 / n as f64;
            let beta = m.beta_cm();
            let f = |nu: f64| {
                let j = m.evaluate_sd(nu);
                let coth = if nu == 0.0 {
                    0.0
                } else {
                    1.0 / (0.5 * beta * nu).tanh()
                };
                let w = units::wavenumber_to_angular(nu) * t;
                let re = if nu == 0.0 {
                    m.lorentz_pair(0.0)
                } else {
                    j * coth * w.cos()
                };
                Complex64::new(re, -j * w.sin())
            };
            let mut sum = (f(0.0) + f(p.omega_max_cm1)) * 0.5;
            for k in 1..n {
                sum += f(k as f64 * h);
            }
            let oracle = sum * h / std::f64::consts::PI;
            assert!(
                (d - oracle).norm() <= 1e-6 * oracle.norm(),
                "t = {t}: {d} vs {oracle}"
            );
        }
    }

    #[test]
    fn high_temperature_growth_is_linear() {
        // J fixed at a low-frequency bath; coth temperature varied with
        // βω ≪ 1 over the integration range.
        let m = model(&[(5.0, 10.0, 100.0)], 300.0);
        let re0 = |t: f64| {
            let p = KernelParams {
                omega_max_cm1: 50.0,
                temperature_k: Some(t),
                rel_tol: 1e-10,
            };
            bath_kernel(&m, 0.0, &p).unwrap().re
        };
        let (d1, d2, d3) = (re0(300.0), re0(600.0), re0(1200.0));
        let s1 = (d2 - d1) / 300.0;
        let s2 = (d3 - d2) / 600.0;
        assert!((s1 - s2).abs() <= 0.02 * s2, "{s1} vs {s2}");
        assert!((d2 / d1 - 2.0).abs() < 0.02 && (d3 / d2 - 2.0).abs() < 0.02);
    }

    #[test]
    fn series_matches_adaptive_quadrature() {
        let m = model(
            &[
                (15.0, 0.0, 500.0),
                (2.0, 180.0, 300.0),
                (30.0, 560.0, 200.0),
            ],
            77.0,
        );
        let params = KernelParams::default();
        let series = kernel_series(&m, 801, 1.25, &params).unwrap();
        for k in [0usize, 1, 8, 80, 400, 800] {
            let exact = bath_kernel(&m, k as f64 * 1.25, &params).unwrap();
            assert!(
                (series[k] - exact).norm() < 1e-8 * exact.norm().max(1.0),
                "k = {k}: {} vs {exact}",
                series[k]
            );
        }
        assert_eq!(series[0].im, 0.0);
        assert!(kernel_series(&m, 3, 0.0, &params).is_err());
        assert!(kernel_series(&model(&[], 77.0), 3, 1.0, &params)
            .unwrap()
            .iter()
            .all(|z| z.norm() == 0.0));
    }

    #[test]
    fn tabulated_kernel_converges_to_analytic() {
        let m = model(&[(30.0, 200.0, 1000.0)], 77.0);
        let grid: Vec<f64> = (0..=8000).map(|k| 0.5 * k as f64).collect();
        let values = grid.iter().map(|&w| m.evaluate_sd(w)).collect();
        let sd = TabulatedSpectralDensity::new(grid, values, 77.0).unwrap();
        for t in [0.0, 20.0, 200.0] {
            let a = bath_kernel(&m, t, &KernelParams::default()).unwrap();
            let b = tabulated_kernel(&sd, t).unwrap();
            assert!((a - b).norm() <= 1e-4 * a.norm(), "t = {t}: {a} vs {b}");
        }
    }
}
