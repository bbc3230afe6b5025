//! Second-order time-convolutionless (TCL-2) propagation of an excitonic
//! system with one pure-dephasing bath per site:
//!
//! ```text
//! dρ/dt = −i[H, ρ] − Σ_n [A_n, Λ_n(t)ρ − ρΛ_n(t)†]
//! Λ_n(t) = ∫₀^t dτ D_n(τ) e^{−iHτ} A_n e^{iHτ},   A_n = |n⟩⟨n|
//! ```
//!
//! The equation is integrated in the exciton eigenbasis and in the
//! interaction picture, so the coherent phases e^{−iω_ab t} are exact and
//! fixed-step RK4 only has to follow the dissipator. In that basis
//! (Λ_n)_ab = V_na V_nb G^n_ab(t) with G^n_ab(t) = ∫₀^t D_n(τ)e^{−iω_ab τ}dτ,
//! accumulated by Simpson's rule on a kernel sub-grid whose spacing does
//! not depend on the step size.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use log::{debug, warn};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::TabulatedSpectralDensity;
use crate::bathmodel::{
    kernel_series, tabulated_kernel, DrudeLorentzModel, KernelParams, DEFAULT_OMEGA_MAX_CM1,
};
use crate::error::{domain, Error, Result};
use crate::units::{energy_squared_to_angular, wavenumber_to_angular};

pub type DensityMatrix = DMatrix<Complex64>;

/// Spectral density of one site's bath.
#[derive(Debug, Clone, PartialEq)]
pub enum SiteBath {
    /// Closed-form Drude-Lorentz model; D by adaptive quadrature.
    Analytic(DrudeLorentzModel),
    /// Tabulated J; D by the trapezoid rule over the table.
    Tabulated(TabulatedSpectralDensity),
}

impl SiteBath {
    /// D(k·h) for k = 0..n in cm⁻², at the given coth temperature.
    fn kernel_samples(
        &self,
        n: usize,
        h: f64,
        temperature_k: f64,
        omega_max: f64,
    ) -> Result<Vec<Complex64>> {
        match self {
            SiteBath::Analytic(model) => {
                let params = KernelParams {
                    omega_max_cm1: omega_max,
                    temperature_k: Some(temperature_k),
                    ..KernelParams::default()
                };
                kernel_series(model, n, h, &params)
            }
            SiteBath::Tabulated(sd) => {
                if (sd.temperature_k() - temperature_k).abs() > 1e-9 * temperature_k {
                    warn!(
                        "tabulated bath at {} K used in a {} K system; its own temperature is kept",
                        sd.temperature_k(),
                        temperature_k
                    );
                }
                (0..n)
                    .into_par_iter()
                    .map(|k| tabulated_kernel(sd, k as f64 * h))
                    .collect()
            }
        }
    }
}

impl From<DrudeLorentzModel> for SiteBath {
    fn from(m: DrudeLorentzModel) -> Self {
        SiteBath::Analytic(m)
    }
}

impl From<TabulatedSpectralDensity> for SiteBath {
    fn from(sd: TabulatedSpectralDensity) -> Self {
        SiteBath::Tabulated(sd)
    }
}

/// Eigenvalues in ascending order; eigenvectors as columns, each signed so
/// its largest-magnitude component is positive.
#[derive(Debug, Clone)]
pub struct ExcitonBasis {
    pub energies_cm1: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl ExcitonBasis {
    pub fn of(hamiltonian: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(hamiltonian.clone());
        let n = hamiltonian.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut vectors = DMatrix::zeros(n, n);
        let mut energies = Vec::with_capacity(n);
        for (c, &k) in order.iter().enumerate() {
            let mut v = eig.eigenvectors.column(k).into_owned();
            let lead = v
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if lead < 0.0 {
                v.neg_mut();
            }
            vectors.set_column(c, &v);
            energies.push(eig.eigenvalues[k]);
        }
        Self {
            energies_cm1: energies,
            vectors,
        }
    }

    /// V†ρV: site → exciton.
    pub fn to_exciton(&self, rho_site: &DensityMatrix) -> DensityMatrix {
        let v = self.vectors.map(|x| Complex64::new(x, 0.0));
        v.transpose() * rho_site * &v
    }

    /// VρV†: exciton → site.
    pub fn to_site(&self, rho_exc: &DensityMatrix) -> DensityMatrix {
        let v = self.vectors.map(|x| Complex64::new(x, 0.0));
        &v * rho_exc * v.transpose()
    }
}

#[derive(Debug, Clone)]
pub struct ExcitonSystem {
    hamiltonian_cm1: DMatrix<f64>,
    site_baths: Vec<SiteBath>,
    temperature_k: f64,
}

impl ExcitonSystem {
    pub fn new(
        hamiltonian_cm1: DMatrix<f64>,
        site_baths: Vec<SiteBath>,
        temperature_k: f64,
    ) -> Result<Self> {
        let n = hamiltonian_cm1.nrows();
        if n < 2 || hamiltonian_cm1.ncols() != n {
            return Err(domain(format!(
                "Hamiltonian must be square with N >= 2, got {}x{}",
                n,
                hamiltonian_cm1.ncols()
            )));
        }
        if hamiltonian_cm1.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Hamiltonian entries".into()));
        }
        let scale = hamiltonian_cm1.amax().max(f64::MIN_POSITIVE);
        let asym = (&hamiltonian_cm1 - hamiltonian_cm1.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(domain(format!(
                "Hamiltonian is not symmetric (max |H - H^T| = {asym:e})"
            )));
        }
        if site_baths.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: site_baths.len(),
            });
        }
        crate::units::thermal_beta(temperature_k)?;
        // symmetrize exactly
        let hamiltonian_cm1 = (&hamiltonian_cm1 + hamiltonian_cm1.transpose()) * 0.5;
        Ok(Self {
            hamiltonian_cm1,
            site_baths,
            temperature_k,
        })
    }

    /// Same bath on every site.
    pub fn uniform(
        hamiltonian_cm1: DMatrix<f64>,
        bath: SiteBath,
        temperature_k: f64,
    ) -> Result<Self> {
        let n = hamiltonian_cm1.nrows();
        Self::new(hamiltonian_cm1, vec![bath; n], temperature_k)
    }

    pub fn n_sites(&self) -> usize {
        self.hamiltonian_cm1.nrows()
    }

    pub fn hamiltonian_cm1(&self) -> &DMatrix<f64> {
        &self.hamiltonian_cm1
    }

    pub fn site_baths(&self) -> &[SiteBath] {
        &self.site_baths
    }

    pub fn temperature_k(&self) -> f64 {
        self.temperature_k
    }

    pub fn exciton_basis(&self) -> ExcitonBasis {
        ExcitonBasis::of(&self.hamiltonian_cm1)
    }
}

/// Reads an N×N matrix from comma- or whitespace-separated text; `#` lines
/// and a non-numeric first row are skipped.
pub fn parse_matrix(text: &str, origin: &Path) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if rows.is_empty() => continue,
            Err(e) => {
                return Err(Error::Parse {
                    path: origin.to_owned(),
                    line: idx + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::TooShort {
            path: origin.to_owned(),
            needed: 1,
            found: 0,
        });
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(Error::Parse {
            path: origin.to_owned(),
            line: bad + 1,
            message: format!(
                "expected {n} columns for a square matrix, found {}",
                rows[bad].len()
            ),
        });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn load_hamiltonian(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_matrix(&text, path)
}

/// |k⟩⟨k| for site k (0-based).
pub fn localized_state(n: usize, site: usize) -> Result<DensityMatrix> {
    if site >= n {
        return Err(domain(format!("site {} out of range 1..={n}", site + 1)));
    }
    let mut rho = DensityMatrix::zeros(n, n);
    rho[(site, site)] = Complex64::new(1.0, 0.0);
    Ok(rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationConfig {
    pub t_max_fs: f64,
    pub dt_fs: f64,
    /// Largest spacing of the grid on which D is sampled and integrated.
    pub kernel_step_fs: f64,
    pub omega_max_cm1: f64,
    /// Trace drift that aborts the run.
    pub trace_abort: f64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            t_max_fs: 1000.0,
            dt_fs: 1.0,
            kernel_step_fs: 1.0 / 16.0,
            omega_max_cm1: DEFAULT_OMEGA_MAX_CM1,
            trace_abort: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Site,
    Exciton,
}

#[derive(Debug, Clone)]
pub struct DensityTrajectory {
    pub times_fs: Vec<f64>,
    pub matrices: Vec<DensityMatrix>,
    pub basis: Basis,
    /// Smallest eigenvalue of ρ at each sample.
    pub min_eigenvalues: Vec<f64>,
    exciton: ExcitonBasis,
}

impl DensityTrajectory {
    pub fn len(&self) -> usize {
        self.times_fs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_fs.is_empty()
    }

    pub fn exciton_basis(&self) -> &ExcitonBasis {
        &self.exciton
    }

    pub fn to_basis(&self, basis: Basis) -> DensityTrajectory {
        if basis == self.basis {
            return self.clone();
        }
        let matrices = self
            .matrices
            .iter()
            .map(|m| match basis {
                Basis::Exciton => self.exciton.to_exciton(m),
                Basis::Site => self.exciton.to_site(m),
            })
            .collect();
        DensityTrajectory {
            times_fs: self.times_fs.clone(),
            matrices,
            basis,
            min_eigenvalues: self.min_eigenvalues.clone(),
            exciton: self.exciton.clone(),
        }
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        self.min_eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_density(rho: &DensityMatrix) -> Result<()> {
    let n = rho.nrows();
    if rho.ncols() != n {
        return Err(domain("initial density matrix must be square"));
    }
    let herm = (rho - rho.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if herm > 1e-10 {
        return Err(domain(format!(
            "initial density matrix is not Hermitian ({herm:e})"
        )));
    }
    let trace = rho.trace();
    if (trace - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
        return Err(domain(format!("initial density matrix has trace {trace}")));
    }
    if min_eigenvalue(rho) < -1e-10 {
        return Err(domain(
            "initial density matrix is not positive semidefinite",
        ));
    }
    Ok(())
}

fn min_eigenvalue(rho: &DensityMatrix) -> f64 {
    let herm = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    herm.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Propagates ρ0 (site basis) over [0, t_max] with step dt and the default
/// kernel resolution.
pub fn propagate(
    sys: &ExcitonSystem,
    rho0: &DensityMatrix,
    t_max_fs: f64,
    dt_fs: f64,
) -> Result<DensityTrajectory> {
    propagate_with(
        sys,
        rho0,
        &PropagationConfig {
            t_max_fs,
            dt_fs,
            ..PropagationConfig::default()
        },
    )
}

pub fn propagate_with(
    sys: &ExcitonSystem,
    rho0: &DensityMatrix,
    cfg: &PropagationConfig,
) -> Result<DensityTrajectory> {
    let n = sys.n_sites();
    if rho0.nrows() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: rho0.nrows(),
        });
    }
    check_density(rho0)?;
    let dt = cfg.dt_fs;
    if !(dt > 0.0 && dt.is_finite()) || !(cfg.t_max_fs > 0.0 && cfg.t_max_fs.is_finite()) {
        return Err(domain(format!(
            "need dt > 0 and t_max > 0, got dt = {dt}, t_max = {}",
            cfg.t_max_fs
        )));
    }
    let steps_f = cfg.t_max_fs / dt;
    let steps = steps_f.round() as usize;
    if steps == 0 || (steps_f - steps as f64).abs() > 1e-9 * steps_f.max(1.0) {
        return Err(domain(format!(
            "dt = {dt} fs does not divide t_max = {} fs",
            cfg.t_max_fs
        )));
    }
    if !(cfg.kernel_step_fs > 0.0) {
        return Err(domain("kernel_step_fs must be positive"));
    }

    // Simpson pairs per half step; sub-grid spacing h ≤ kernel_step_fs.
    let pairs = ((0.5 * dt) / (2.0 * cfg.kernel_step_fs) - 1e-9)
        .ceil()
        .max(1.0) as usize;
    let h = 0.5 * dt / (2 * pairs) as f64;
    let sub_points = 2 * steps * 2 * pairs + 1;

    let basis = sys.exciton_basis();
    let mean = basis.energies_cm1.iter().sum::<f64>() / n as f64;
    let omega: Vec<f64> = basis
        .energies_cm1
        .iter()
        .map(|e| wavenumber_to_angular(e - mean))
        .collect();
    let v = &basis.vectors;

    // distinct baths, D in rad²/fs²
    let mut unique: Vec<&SiteBath> = Vec::new();
    let mut bath_of_site = Vec::with_capacity(n);
    for bath in sys.site_baths() {
        match unique.iter().position(|u| *u == bath) {
            Some(k) => bath_of_site.push(k),
            None => {
                bath_of_site.push(unique.len());
                unique.push(bath);
            }
        }
    }
    let kernels: Vec<Vec<Complex64>> = unique
        .iter()
        .map(|b| {
            let raw = b.kernel_samples(sub_points, h, sys.temperature_k(), cfg.omega_max_cm1)?;
            Ok(raw
                .into_iter()
                .map(|d| d * energy_squared_to_angular(1.0))
                .collect())
        })
        .collect::<Result<_>>()?;
    debug!(
        "kernel: {} distinct baths, {} samples at h = {h} fs",
        unique.len(),
        sub_points
    );

    // G^b_ab for each distinct bath, at the current half-step time
    let mut g: Vec<DMatrix<Complex64>> = vec![DMatrix::zeros(n, n); unique.len()];
    let phase_step = |k: usize| -> DMatrix<Complex64> {
        let tau = k as f64 * h;
        DMatrix::from_fn(n, n, |a, b| {
            Complex64::from_polar(1.0, -(omega[a] - omega[b]) * tau)
        })
    };
    let advance = |g: &mut Vec<DMatrix<Complex64>>, half_step: usize| {
        let k0 = half_step * 2 * pairs;
        for p in 0..pairs {
            let k = k0 + 2 * p;
            let (e0, e1, e2) = (phase_step(k), phase_step(k + 1), phase_step(k + 2));
            for (b, gb) in g.iter_mut().enumerate() {
                let d = &kernels[b];
                for idx in 0..n * n {
                    gb[idx] += (e0[idx] * d[k] + e1[idx] * d[k + 1] * 4.0 + e2[idx] * d[k + 2])
                        * (h / 3.0);
                }
            }
        }
    };

    // Λ_n in the exciton basis from the accumulated G
    let projectors: Vec<DMatrix<f64>> = (0..n)
        .map(|site| DMatrix::from_fn(n, n, |a, b| v[(site, a)] * v[(site, b)]))
        .collect();
    let lambdas = |g: &[DMatrix<Complex64>]| -> Vec<DMatrix<Complex64>> {
        (0..n)
            .map(|site| {
                let gb = &g[bath_of_site[site]];
                DMatrix::from_fn(n, n, |a, b| gb[(a, b)] * projectors[site][(a, b)])
            })
            .collect()
    };
    let cplx_proj: Vec<DMatrix<Complex64>> = projectors
        .iter()
        .map(|p| p.map(|x| Complex64::new(x, 0.0)))
        .collect();

    // interaction-picture right-hand side
    let rhs =
        |t: f64, sigma: &DMatrix<Complex64>, lam: &[DMatrix<Complex64>]| -> DMatrix<Complex64> {
            let rot = DMatrix::from_fn(n, n, |a, b| {
                Complex64::from_polar(1.0, (omega[a] - omega[b]) * t)
            });
            let rho = sigma.component_div(&rot);
            let mut out = DMatrix::<Complex64>::zeros(n, n);
            for site in 0..n {
                let l = &lam[site];
                let x = l * &rho - &rho * l.adjoint();
                let p = &cplx_proj[site];
                out -= p * &x - &x * p;
            }
            out.component_mul(&rot)
        };

    let mut sigma = basis.to_exciton(rho0);
    let mut times = Vec::with_capacity(steps + 1);
    let mut matrices = Vec::with_capacity(steps + 1);
    let mut min_eigs = Vec::with_capacity(steps + 1);
    times.push(0.0);
    matrices.push(rho0.clone());
    min_eigs.push(min_eigenvalue(rho0));

    let mut lam_now = lambdas(&g);
    for step in 0..steps {
        let t = step as f64 * dt;
        advance(&mut g, 2 * step);
        let lam_mid = lambdas(&g);
        advance(&mut g, 2 * step + 1);
        let lam_end = lambdas(&g);

        let k1 = rhs(t, &sigma, &lam_now);
        let k2 = rhs(
            t + 0.5 * dt,
            &(&sigma + &k1 * Complex64::new(0.5 * dt, 0.0)),
            &lam_mid,
        );
        let k3 = rhs(
            t + 0.5 * dt,
            &(&sigma + &k2 * Complex64::new(0.5 * dt, 0.0)),
            &lam_mid,
        );
        let k4 = rhs(t + dt, &(&sigma + &k3 * Complex64::new(dt, 0.0)), &lam_end);
        sigma += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
            * Complex64::new(dt / 6.0, 0.0);
        lam_now = lam_end;

        let t_next = (step + 1) as f64 * dt;
        let rot = DMatrix::from_fn(n, n, |a, b| {
            Complex64::from_polar(1.0, -(omega[a] - omega[b]) * t_next)
        });
        let rho_exc = sigma.component_mul(&rot);
        let rho_site = basis.to_site(&rho_exc);
        if rho_site
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::Propagation {
                time_fs: t_next,
                reason: "non-finite density matrix entries".into(),
            });
        }
        let drift = (rho_site.trace() - Complex64::new(1.0, 0.0)).norm();
        if drift > cfg.trace_abort {
            return Err(Error::Propagation {
                time_fs: t_next,
                reason: format!("trace drifted by {drift:e}"),
            });
        }
        min_eigs.push(min_eigenvalue(&rho_site));
        times.push(t_next);
        matrices.push(rho_site);
    }
    let worst = min_eigs.iter().copied().fold(f64::INFINITY, f64::min);
    if worst < -1e-6 {
        warn!("density matrix lost positivity: smallest eigenvalue {worst:e}");
    }
    Ok(DensityTrajectory {
        times_fs: times,
        matrices,
        basis: Basis::Site,
        min_eigenvalues: min_eigs,
        exciton: basis,
    })
}

/// A scalar view of the trajectory. Indices are 0-based; the textual form
/// (`site:1`, `site:1-3`, `exciton:2`, `exciton:1-3`) is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    SitePopulation(usize),
    SiteCoherence(usize, usize),
    ExcitonPopulation(usize),
    ExcitonCoherence(usize, usize),
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Observable::SitePopulation(i) => write!(f, "site:{}", i + 1),
            Observable::SiteCoherence(i, j) => write!(f, "site:{}-{}", i + 1, j + 1),
            Observable::ExcitonPopulation(i) => write!(f, "exciton:{}", i + 1),
            Observable::ExcitonCoherence(i, j) => write!(f, "exciton:{}-{}", i + 1, j + 1),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            domain(format!(
                "invalid observable {s:?}; expected site:K, site:K-L, exciton:K or exciton:K-L"
            ))
        };
        let (kind, rest) = s.trim().split_once(':').ok_or_else(bad)?;
        let index = |x: &str| -> Result<usize> {
            let k: usize = x.trim().parse().map_err(|_| bad())?;
            k.checked_sub(1).ok_or_else(bad)
        };
        let pair = match rest.split_once('-') {
            Some((a, b)) => Some((index(a)?, index(b)?)),
            None => None,
        };
        match (kind.trim(), pair) {
            ("site", None) => Ok(Observable::SitePopulation(index(rest)?)),
            ("site", Some((a, b))) => Ok(Observable::SiteCoherence(a, b)),
            ("exciton", None) => Ok(Observable::ExcitonPopulation(index(rest)?)),
            ("exciton", Some((a, b))) => Ok(Observable::ExcitonCoherence(a, b)),
            _ => Err(bad()),
        }
    }
}

/// Named time series: populations give one column, coherences give `re_`
/// and `im_` columns.
pub fn observables(
    traj: &DensityTrajectory,
    which: &[Observable],
) -> Result<Vec<(String, Vec<f64>)>> {
    let n = traj.matrices.first().map_or(0, |m| m.nrows());
    let site = traj.to_basis(Basis::Site);
    let needs_exciton = which.iter().any(|o| {
        matches!(
            o,
            Observable::ExcitonPopulation(_) | Observable::ExcitonCoherence(..)
        )
    });
    let exciton = needs_exciton.then(|| traj.to_basis(Basis::Exciton));
    let mut out = Vec::new();
    for obs in which {
        let (mats, i, j) = match *obs {
            Observable::SitePopulation(i) => (&site, i, i),
            Observable::SiteCoherence(i, j) => (&site, i, j),
            Observable::ExcitonPopulation(i) => (exciton.as_ref().expect("computed"), i, i),
            Observable::ExcitonCoherence(i, j) => (exciton.as_ref().expect("computed"), i, j),
        };
        if i >= n || j >= n {
            return Err(domain(format!(
                "observable {obs} out of range for {n} states"
            )));
        }
        let series: Vec<Complex64> = mats.matrices.iter().map(|m| m[(i, j)]).collect();
        let label = obs.to_string().replace(':', "_");
        if i == j {
            out.push((
                format!("pop_{label}"),
                series.iter().map(|z| z.re).collect(),
            ));
        } else {
            out.push((format!("re_{label}"), series.iter().map(|z| z.re).collect()));
            out.push((format!("im_{label}"), series.iter().map(|z| z.im).collect()));
        }
    }
    Ok(out)
}
