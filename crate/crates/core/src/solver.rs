//! Sparse recovery of damped-cosine coefficients by total-variation plus L1
//! regularization.
//!
//! The constrained problem
//!
//! ```text
//! minimize ‖∇λ‖₁ + μ‖λ‖₁  subject to  ‖Aλ − C‖₂ < η‖C‖₂
//! ```
//!
//! is approached through its penalized form
//! ½‖Aλ − C‖² + τ(‖∇λ‖₁ + μ‖λ‖₁), solved with two-step iterative
//! shrinkage/thresholding (TwIST) for a decreasing sequence of τ until the
//! residual constraint holds. The gradient ∇ is the anisotropic forward
//! difference on the (γ, Ω) grid. A least-squares refit on the recovered
//! support (debiasing) follows.

use std::fmt;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use ndarray::{s, Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::atom::Atom;
use crate::dictionary::Measurement;
use crate::error::{domain, Error, Result};
use crate::timeseries::CorrelationSeries;

/// Smallest |λ| (after un-scaling) that counts as a recovered atom.
pub const PRUNE_FLOOR: f64 = 1e-12;

/// Sup-norm change below which an iterate counts as unchanged.
pub const STALL_CHANGE: f64 = 1e-14;

const MIN_STAGE_ITERS: usize = 10;
const REFRESH_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Weight of the L1 term relative to total variation.
    pub mu: f64,
    /// Residual tolerance, relative to ‖C‖₂.
    pub eta: f64,
    /// Iterations without change that end the solve.
    pub stall_iters: usize,
    pub max_iters: usize,
    /// Dual-projection sweeps per TV proximal step.
    pub tv_inner_iters: usize,
    pub twist_alpha: f64,
    pub twist_beta: f64,
    pub debias: bool,
    /// Relative residual the debiasing refit aims for.
    pub debias_eta: f64,
    /// First penalty weight, as a fraction of ‖AᵀC‖∞ (normalized data).
    pub tau_start: f64,
    /// Factor applied to the penalty weight between continuation stages.
    pub continuation_factor: f64,
    /// Relative iterate change that ends a continuation stage.
    pub stage_tol: f64,
    /// Iteration cap per continuation stage.
    pub stage_max_iters: usize,
    /// Largest support the refit attempts.
    pub debias_max_support: usize,
}

/// Ill-conditioning parameter assumed by the TwIST step rule.
pub const TWIST_RHO: f64 = 0.99;

/// (α, β) of the TwIST recursion for an operator rescaled to unit norm:
/// α = 2/(1 + √(1−ρ²)), β = 2α/(1 + ξ₁) with ξ₁ = (1−ρ)/(1+ρ).
pub fn twist_parameters(rho: f64) -> (f64, f64) {
    let xi1 = (1.0 - rho) / (1.0 + rho);
    let alpha = 2.0 / (1.0 + (1.0 - rho * rho).sqrt());
    let beta = 2.0 * alpha / (1.0 + xi1);
    (alpha, beta)
}

impl Default for SolverConfig {
    fn default() -> Self {
        let (alpha, beta) = twist_parameters(TWIST_RHO);
        Self {
            mu: 1.0,
            eta: 1e-7,
            stall_iters: 100,
            max_iters: 20_000,
            tv_inner_iters: 10,
            twist_alpha: alpha,
            twist_beta: beta,
            debias: true,
            debias_eta: 1e-9,
            tau_start: 0.25,
            continuation_factor: 0.5,
            stage_tol: 1e-4,
            stage_max_iters: 500,
            debias_max_support: 1000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(domain(format!("eta must be positive, got {}", self.eta)));
        }
        if self.debias && !(self.debias_eta > 0.0 && self.debias_eta < self.eta) {
            return Err(domain(format!(
                "debias_eta must lie in (0, eta = {}), got {}",
                self.eta, self.debias_eta
            )));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(domain(format!("mu must be >= 0, got {}", self.mu)));
        }
        if !(self.twist_alpha > 0.0 && self.twist_alpha < 2.0) {
            return Err(domain(format!(
                "twist_alpha must lie in (0, 2), got {}",
                self.twist_alpha
            )));
        }
        if !(self.twist_beta > 0.0 && self.twist_beta.is_finite()) {
            return Err(domain(format!(
                "twist_beta must be positive, got {}",
                self.twist_beta
            )));
        }
        if !(self.tau_start > 0.0 && self.tau_start.is_finite()) {
            return Err(domain("tau_start must be positive"));
        }
        if !(self.continuation_factor > 0.0 && self.continuation_factor < 1.0) {
            return Err(domain("continuation_factor must lie in (0, 1)"));
        }
        if self.max_iters == 0 || self.stall_iters == 0 || self.stage_max_iters == 0 {
            return Err(domain("iteration limits must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The data were identically zero.
    ZeroData,
    /// ‖Aλ − C‖ < η‖C‖.
    Residual,
    /// The iterate did not change for `stall_iters` iterations.
    Stalled,
    /// `max_iters` reached without meeting the residual tolerance.
    IterationCap,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Termination::ZeroData => "zero data",
            Termination::Residual => "residual tolerance",
            Termination::Stalled => "stalled",
            Termination::IterationCap => "iteration cap",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSpectrum {
    pub atoms: Vec<Atom>,
    /// ‖Aλ − C‖₂ in the units of C.
    pub residual_norm: f64,
    /// residual_norm / ‖C‖₂ (0 for zero data).
    pub relative_residual: f64,
    pub iterations: usize,
    pub stages: usize,
    pub termination: Termination,
    /// Residual before the debiasing refit, if one ran.
    pub pre_debias_residual: Option<f64>,
    pub debias_applied: bool,
    /// Atoms removed by the refit because the support was rank deficient.
    #[serde(default)]
    pub dropped_atoms: Vec<Atom>,
    /// (stage, objective) after every accepted iteration.
    #[serde(skip)]
    pub objective_trace: Vec<(usize, f64)>,
}

impl SparseSpectrum {
    pub fn converged(&self) -> bool {
        matches!(
            self.termination,
            Termination::Residual | Termination::Stalled | Termination::ZeroData
        )
    }
}

// ---------------------------------------------------------------------------
// Regularizer

/// Anisotropic total variation with replicate boundaries: Σ|x_{i+1,j} − x_{ij}|
/// + Σ|x_{i,j+1} − x_{ij}|.
pub fn total_variation(x: ArrayView2<'_, f64>) -> f64 {
    let down = (&x.slice(s![1.., ..]) - &x.slice(s![..-1, ..]))
        .mapv(f64::abs)
        .sum();
    let right = (&x.slice(s![.., 1..]) - &x.slice(s![.., ..-1]))
        .mapv(f64::abs)
        .sum();
    down + right
}

fn l1(x: ArrayView2<'_, f64>) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

fn soft_threshold_in_place(x: &mut Array2<f64>, tau: f64) {
    if tau <= 0.0 {
        return;
    }
    x.mapv_inplace(|v| {
        let m = v.abs() - tau;
        if m > 0.0 {
            m.copysign(v)
        } else {
            0.0
        }
    });
}

/// Dual variables of the TV proximal problem, one per forward difference,
/// stored row-major: `down` is (G−1)×W, `right` is G×(W−1).
#[derive(Debug, Clone)]
struct TvDual {
    ng: usize,
    nw: usize,
    down: Vec<f64>,
    right: Vec<f64>,
}

impl TvDual {
    fn zeros((ng, nw): (usize, usize)) -> Self {
        Self {
            ng,
            nw,
            down: vec![0.0; ng.saturating_sub(1) * nw],
            right: vec![0.0; ng * nw.saturating_sub(1)],
        }
    }

    /// x = z − weight·Dᵀu.
    fn primal(&self, z: &[f64], weight: f64, x: &mut [f64]) {
        let (ng, nw) = (self.ng, self.nw);
        let rw = nw.saturating_sub(1);
        for i in 0..ng {
            for j in 0..nw {
                let mut d = 0.0;
                if i > 0 {
                    d += self.down[(i - 1) * nw + j];
                }
                if i + 1 < ng {
                    d -= self.down[i * nw + j];
                }
                if j > 0 {
                    d += self.right[i * rw + j - 1];
                }
                if j + 1 < nw {
                    d -= self.right[i * rw + j];
                }
                x[i * nw + j] = z[i * nw + j] - weight * d;
            }
        }
    }

    /// self = clip(from + step·Dx).
    fn ascend(&mut self, from: &TvDual, x: &[f64], step: f64) {
        let (ng, nw) = (self.ng, self.nw);
        let rw = nw.saturating_sub(1);
        for i in 0..ng.saturating_sub(1) {
            for j in 0..nw {
                let k = i * nw + j;
                self.down[k] = (from.down[k] + step * (x[k + nw] - x[k])).clamp(-1.0, 1.0);
            }
        }
        for i in 0..ng {
            for j in 0..rw {
                let k = i * rw + j;
                let xk = i * nw + j;
                self.right[k] = (from.right[k] + step * (x[xk + 1] - x[xk])).clamp(-1.0, 1.0);
            }
        }
    }

    /// self = a + m·(a − b).
    fn extrapolate(&mut self, a: &TvDual, b: &TvDual, m: f64) {
        for (l, (&n, &p)) in self.down.iter_mut().zip(a.down.iter().zip(&b.down)) {
            *l = n + m * (n - p);
        }
        for (l, (&n, &p)) in self.right.iter_mut().zip(a.right.iter().zip(&b.right)) {
            *l = n + m * (n - p);
        }
    }
}

/// argmin_x ½‖x − z‖² + weight·TV(x), by fast gradient projection on the
/// dual, warm-started from and writing back to `dual`.
fn tv_prox(z: &Array2<f64>, weight: f64, iters: usize, dual: &mut TvDual) -> Array2<f64> {
    if weight <= 0.0 || iters == 0 {
        return z.clone();
    }
    let shape = z.dim();
    let z = z.as_standard_layout();
    let zs = z.as_slice().expect("standard layout");
    let step = 1.0 / (8.0 * weight);
    let mut prev = dual.clone();
    let mut look = dual.clone();
    let mut next = dual.clone();
    let mut x = vec![0.0; zs.len()];
    let mut t = 1.0f64;
    for _ in 0..iters {
        look.primal(zs, weight, &mut x);
        next.ascend(&look, &x, step);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        look.extrapolate(&next, &prev, (t - 1.0) / t_next);
        std::mem::swap(&mut prev, &mut next);
        t = t_next;
    }
    prev.primal(zs, weight, &mut x);
    *dual = prev;
    Array2::from_shape_vec(shape, x).expect("grid shape")
}

/// Approximate proximal operator of tv_weight·TV + l1_weight·‖·‖₁: TV
/// denoising by `inner_iters` dual-projection sweeps, then soft thresholding.
pub fn tv_l1_prox(
    grid: &Array2<f64>,
    tv_weight: f64,
    l1_weight: f64,
    inner_iters: usize,
) -> Array2<f64> {
    let mut dual = TvDual::zeros(grid.dim());
    tv_l1_prox_warm(grid, tv_weight, l1_weight, inner_iters, &mut dual)
}

fn tv_l1_prox_warm(
    grid: &Array2<f64>,
    tv_weight: f64,
    l1_weight: f64,
    inner_iters: usize,
    dual: &mut TvDual,
) -> Array2<f64> {
    let mut x = tv_prox(grid, tv_weight.max(0.0), inner_iters, dual);
    soft_threshold_in_place(&mut x, l1_weight.max(0.0));
    x
}

// ---------------------------------------------------------------------------
// Solver

struct Problem {
    data: Array1<f64>,
    mu: f64,
}

impl Problem {
    fn residual(&self, ax: &Array1<f64>) -> Array1<f64> {
        &self.data - ax
    }

    fn objective(&self, x: &Array2<f64>, ax: &Array1<f64>, tau: f64) -> f64 {
        let r = self.residual(ax);
        0.5 * r.dot(&r) + tau * (total_variation(x.view()) + self.mu * l1(x.view()))
    }
}

fn check_finite(x: &Array2<f64>, what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!(
            "{what}; the step size is likely too large"
        )))
    }
}

/// Recovers a sparse set of damped-cosine atoms reproducing `corr`.
pub fn solve(
    corr: &CorrelationSeries,
    meas: &Measurement,
    cfg: &SolverConfig,
) -> Result<SparseSpectrum> {
    cfg.validate()?;
    if corr.max_lag() != meas.n_times() {
        return Err(Error::Dimension {
            expected: meas.n_times(),
            actual: corr.max_lag(),
        });
    }
    let data_norm = corr.norm();
    if data_norm == 0.0 {
        return Ok(SparseSpectrum {
            atoms: Vec::new(),
            residual_norm: 0.0,
            relative_residual: 0.0,
            iterations: 0,
            stages: 0,
            termination: Termination::ZeroData,
            pre_debias_residual: None,
            debias_applied: false,
            dropped_atoms: Vec::new(),
            objective_trace: Vec::new(),
        });
    }

    // Solve for unit-norm data; amplitudes are rescaled at the end.
    let problem = Problem {
        data: Array1::from_iter(corr.values().iter().map(|v| v / data_norm)),
        mu: cfg.mu,
    };
    let shape = meas.grid().shape();
    let lipschitz = {
        let n = meas.operator_norm_estimate() * 1.01;
        n * n
    };
    let correlation = meas.apply_adjoint(problem.data.view())?;
    let max_corr = correlation.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut tau = cfg.tau_start * max_corr;
    // below this the penalty no longer shapes a solution with residual η
    let tau_floor = 1e-2 * cfg.eta * lipschitz.sqrt();

    let (alpha, beta) = (cfg.twist_alpha, cfg.twist_beta);
    let mut x = Array2::<f64>::zeros(shape);
    let mut ax = Array1::<f64>::zeros(meas.n_times());
    let mut dual = TvDual::zeros(shape);
    let mut iterations = 0usize;
    let mut stages = 0usize;
    let mut unchanged = 0usize;
    let mut inner_iters = cfg.tv_inner_iters;
    let (mut twist_steps, mut ist_steps) = (0usize, 0usize);
    let mut objective_trace = Vec::new();
    let termination;

    let mut x_prev = x.clone();
    let mut ax_prev = ax.clone();
    'stages: loop {
        stages += 1;
        let mut objective = problem.objective(&x, &ax, tau);
        let mut stage_iters = 0usize;
        debug!("stage {stages}: tau = {tau:.3e}");
        loop {
            if iterations >= cfg.max_iters {
                termination = Termination::IterationCap;
                break 'stages;
            }
            iterations += 1;
            stage_iters += 1;
            if iterations.is_multiple_of(REFRESH_EVERY) {
                // the images of the two-step combinations drift by rounding
                ax = meas.apply(x.view())?;
                ax_prev = meas.apply(x_prev.view())?;
                objective = problem.objective(&x, &ax, tau);
            }

            // Γ(x) = Ψ(x + Aᵀ(C − Ax)/L)
            let grad = meas.apply_adjoint(problem.residual(&ax).view())?;
            let step_point = &x + &(grad / lipschitz);
            let gamma = tv_l1_prox_warm(
                &step_point,
                tau / lipschitz,
                tau * cfg.mu / lipschitz,
                inner_iters,
                &mut dual,
            );
            check_finite(&gamma, "shrinkage step produced non-finite values")?;
            let a_gamma = meas.apply(gamma.view())?;

            let mut accepted = None;
            if iterations > 1 {
                // x⁺ = (1−α)x⁻ + (α−β)x + βΓ(x), and its image by linearity
                let mut cand = &x_prev * (1.0 - alpha) + &x * (alpha - beta);
                cand.scaled_add(beta, &gamma);
                let mut a_cand = &ax_prev * (1.0 - alpha) + &ax * (alpha - beta);
                a_cand.scaled_add(beta, &a_gamma);
                let f = problem.objective(&cand, &a_cand, tau);
                if f <= objective {
                    accepted = Some((cand, a_cand, f));
                    twist_steps += 1;
                }
            }
            if accepted.is_none() {
                let f = problem.objective(&gamma, &a_gamma, tau);
                if f <= objective * (1.0 + 1e-12) {
                    accepted = Some((gamma, a_gamma, f));
                    ist_steps += 1;
                } else {
                    // inexact prox: tighten it and retry from the same point
                    inner_iters = (inner_iters * 2).min(cfg.tv_inner_iters * 64);
                }
            }

            let (change, rel_change) = match accepted {
                Some((next, a_next, f)) => {
                    let diff = &next - &x;
                    let change = diff.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let rel = diff.iter().map(|v| v * v).sum::<f64>().sqrt()
                        / norm.max(f64::MIN_POSITIVE);
                    x_prev = std::mem::replace(&mut x, next);
                    ax_prev = std::mem::replace(&mut ax, a_next);
                    objective = f;
                    objective_trace.push((stages, f));
                    (change, rel)
                }
                None => (0.0, 0.0),
            };

            let r = problem.residual(&ax);
            let rel_residual = r.dot(&r).sqrt();
            if rel_residual < cfg.eta {
                termination = Termination::Residual;
                break 'stages;
            }
            if change < STALL_CHANGE {
                unchanged += 1;
                if unchanged >= cfg.stall_iters {
                    termination = Termination::Stalled;
                    break 'stages;
                }
            } else {
                unchanged = 0;
            }
            let settled = stage_iters >= MIN_STAGE_ITERS && rel_change < cfg.stage_tol;
            if settled || stage_iters >= cfg.stage_max_iters {
                debug!(
                    "stage {stages} done after {stage_iters} iterations ({twist_steps} twist, {ist_steps} ist in total, {inner_iters} tv sweeps), residual {rel_residual:.3e}"
                );
                break;
            }
        }
        tau = (tau * cfg.continuation_factor).max(tau_floor);
    }

    let r = problem.residual(&ax);
    let rel_residual = r.dot(&r).sqrt();
    if termination == Termination::IterationCap {
        warn!(
            "solver reached max_iters = {} with relative residual {rel_residual:.3e} > eta = {:.1e}",
            cfg.max_iters, cfg.eta
        );
    }

    let support = support_of(&x, meas, data_norm);
    let mut spectrum = SparseSpectrum {
        atoms: support,
        residual_norm: rel_residual * data_norm,
        relative_residual: rel_residual,
        iterations,
        stages,
        termination,
        pre_debias_residual: None,
        debias_applied: false,
        dropped_atoms: Vec::new(),
        objective_trace,
    };
    if cfg.debias && !spectrum.atoms.is_empty() {
        spectrum = debias(&spectrum, corr, meas, cfg)?;
    }
    Ok(spectrum)
}

fn support_of(x: &Array2<f64>, meas: &Measurement, data_norm: f64) -> Vec<Atom> {
    let grid = meas.grid();
    let scales = meas.scales();
    let mut out = Vec::new();
    for ((i, j), &v) in x.indexed_iter() {
        let amplitude = v * scales[[i, j]] * data_norm;
        if amplitude.abs() > PRUNE_FLOOR {
            out.push(Atom::new(
                grid.gammas_cm1()[i],
                grid.omegas_cm1()[j],
                amplitude,
            ));
        }
    }
    out
}

fn locate(meas: &Measurement, atom: &Atom) -> Result<(usize, usize)> {
    let grid = meas.grid();
    let (i, j) = grid.nearest(atom.gamma_cm1, atom.omega_cm1);
    let hit = (grid.gammas_cm1()[i] - atom.gamma_cm1).abs() < 1e-9
        && (grid.omegas_cm1()[j] - atom.omega_cm1).abs() < 1e-9;
    if hit {
        Ok((i, j))
    } else {
        Err(domain(format!(
            "atom (gamma {}, omega {}) is not on the measurement grid",
            atom.gamma_cm1, atom.omega_cm1
        )))
    }
}

/// Least-squares refit of the amplitudes on the fixed support of `spectrum`.
/// Never adds atoms; drops the weakest atom of any dependent set.
pub fn debias(
    spectrum: &SparseSpectrum,
    corr: &CorrelationSeries,
    meas: &Measurement,
    cfg: &SolverConfig,
) -> Result<SparseSpectrum> {
    if spectrum.atoms.is_empty() {
        return Err(domain("cannot debias an empty support"));
    }
    if corr.max_lag() != meas.n_times() {
        return Err(Error::Dimension {
            expected: meas.n_times(),
            actual: corr.max_lag(),
        });
    }
    let data = Array1::from_iter(corr.values().iter().copied());
    let data_norm = data.dot(&data).sqrt();
    let scales = meas.scales();

    let mut members: Vec<((usize, usize), Atom)> = Vec::with_capacity(spectrum.atoms.len());
    for atom in &spectrum.atoms {
        let idx = locate(meas, atom)?;
        if scales[idx] == 0.0 {
            continue;
        }
        members.push((idx, *atom));
    }
    let input_residual = residual_of(&members, &data, meas);
    let mut dropped = Vec::new();
    if members.len() > cfg.debias_max_support {
        warn!(
            "support of {} atoms exceeds debias_max_support = {}; refit skipped",
            members.len(),
            cfg.debias_max_support
        );
        let mut out = spectrum.clone();
        out.residual_norm = input_residual;
        out.relative_residual = input_residual / data_norm.max(f64::MIN_POSITIVE);
        out.pre_debias_residual = Some(input_residual);
        out.debias_applied = false;
        return Ok(out);
    }

    // Columns of the unit-norm operator restricted to the support.
    let columns = |members: &[((usize, usize), Atom)]| -> DMatrix<f64> {
        let k = meas.n_times();
        let mut m = DMatrix::zeros(k, members.len());
        for (c, ((i, j), _)) in members.iter().enumerate() {
            let col = meas.column(*i, *j);
            for r in 0..k {
                m[(r, c)] = col[r];
            }
        }
        m
    };

    // Greedy rank reveal: strongest atoms first, an atom whose column lies in
    // the span of the ones already kept is dropped.
    members.sort_by(|a, b| b.1.amplitude.abs().total_cmp(&a.1.amplitude.abs()));
    let mut basis: Vec<Array1<f64>> = Vec::new();
    let mut kept = Vec::with_capacity(members.len());
    for (idx, atom) in members {
        let col = meas.column(idx.0, idx.1);
        let norm = col.dot(&col).sqrt();
        let mut v = col;
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&v);
                v.scaled_add(-proj, q);
            }
        }
        let rest = v.dot(&v).sqrt();
        if rest > 1e-6 * norm {
            basis.push(v / rest);
            kept.push((idx, atom));
        } else {
            debug!("debias: dropping dependent atom {atom:?}");
            dropped.push(atom);
        }
    }
    drop(basis);
    let mut members = kept;
    members.sort_by_key(|(idx, _)| *idx);
    let cols = columns(&members);
    let gram = cols.transpose() * &cols;

    let rhs = cols.transpose() * DVector::from_iterator(data.len(), data.iter().copied());
    // start from the current amplitudes in unit-column coordinates
    let start = DVector::from_iterator(
        members.len(),
        members.iter().map(|(idx, a)| a.amplitude / scales[*idx]),
    );
    let coeffs = conjugate_gradient(&gram, &rhs, start, 1e-12, 10 * members.len().max(1));

    let mut refit: Vec<((usize, usize), Atom)> = members
        .iter()
        .zip(coeffs.iter())
        .map(|((idx, a), &z)| (*idx, Atom::new(a.gamma_cm1, a.omega_cm1, z * scales[*idx])))
        .filter(|(_, a)| a.amplitude.abs() > PRUNE_FLOOR)
        .collect();
    let mut residual = residual_of(&refit, &data, meas);
    if !(residual <= input_residual) {
        // keep the input when the refit (after any drops) is no better
        refit = spectrum
            .atoms
            .iter()
            .map(|a| Ok((locate(meas, a)?, *a)))
            .collect::<Result<_>>()?;
        residual = input_residual;
        dropped.clear();
    }
    let relative = residual / data_norm.max(f64::MIN_POSITIVE);
    if relative >= cfg.debias_eta {
        debug!(
            "debias reached relative residual {relative:.3e} (target {:.1e})",
            cfg.debias_eta
        );
    }
    Ok(SparseSpectrum {
        atoms: refit.into_iter().map(|(_, a)| a).collect(),
        residual_norm: residual,
        relative_residual: relative,
        iterations: spectrum.iterations,
        stages: spectrum.stages,
        termination: spectrum.termination,
        pre_debias_residual: Some(input_residual),
        debias_applied: true,
        dropped_atoms: dropped,
        objective_trace: spectrum.objective_trace.clone(),
    })
}

fn residual_of(members: &[((usize, usize), Atom)], data: &Array1<f64>, meas: &Measurement) -> f64 {
    let mut model = Array1::<f64>::zeros(meas.n_times());
    let scales = meas.scales();
    for ((i, j), atom) in members {
        let col = meas.column(*i, *j);
        model.scaled_add(atom.amplitude / scales[[*i, *j]], &col);
    }
    let r = data - &model;
    r.dot(&r).sqrt()
}

/// Conjugate gradient for a symmetric positive definite system.
fn conjugate_gradient(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    mut x: DVector<f64>,
    rel_tol: f64,
    max_iters: usize,
) -> DVector<f64> {
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return DVector::zeros(b.len());
    }
    let mut r = b - a * &x;
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    for _ in 0..max_iters {
        if rr.sqrt() <= rel_tol * b_norm {
            break;
        }
        let ap = a * &p;
        let denom = p.dot(&ap);
        if denom <= 0.0 {
            break;
        }
        let step = rr / denom;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &ap, 1.0);
        let rr_next = r.dot(&r);
        p = &r + &p * (rr_next / rr);
        rr = rr_next;
    }
    x
}
