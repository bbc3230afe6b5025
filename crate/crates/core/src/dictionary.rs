//! The damped-cosine measurement operator over a (γ, Ω) grid.
//!
//! Coefficients are laid out as a `gammas × omegas` array. Because every atom
//! factors as e^{−γ_i t}·cos(Ω_j t), the operator is stored as a decay table
//! (times × gammas) and a cosine table (times × omegas), and both `apply` and
//! `apply_adjoint` reduce to one matrix product each. [`Storage::Dense`]
//! materializes the full times × atoms matrix instead.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::timeseries::CorrelationSeries;
use crate::units::wavenumber_to_angular;

/// Grid of damping rates (rows) and frequencies (columns), both in cm⁻¹.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomGrid {
    gammas_cm1: Vec<f64>,
    omegas_cm1: Vec<f64>,
}

impl AtomGrid {
    pub fn new(gammas_cm1: Vec<f64>, omegas_cm1: Vec<f64>) -> Result<Self> {
        for (name, axis) in [("gamma", &gammas_cm1), ("omega", &omegas_cm1)] {
            if axis.is_empty() {
                return Err(domain(format!("{name} grid is empty")));
            }
            if axis.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(domain(format!(
                    "{name} grid values must be finite and >= 0"
                )));
            }
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(domain(format!("{name} grid must be strictly increasing")));
            }
        }
        Ok(Self {
            gammas_cm1,
            omegas_cm1,
        })
    }

    /// `0, step, ...` up to the largest multiple of `step` not above `max`.
    pub fn uniform(
        gamma_max: f64,
        gamma_step: f64,
        omega_max: f64,
        omega_step: f64,
    ) -> Result<Self> {
        let axis = |max: f64, step: f64, name: &str| -> Result<Vec<f64>> {
            if !(step > 0.0 && max >= 0.0 && max.is_finite() && step.is_finite()) {
                return Err(domain(format!(
                    "invalid {name} grid: max {max}, step {step}"
                )));
            }
            let count = (max / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| i as f64 * step).collect())
        };
        Self::new(
            axis(gamma_max, gamma_step, "gamma")?,
            axis(omega_max, omega_step, "omega")?,
        )
    }

    /// Ω = 0..2000 cm⁻¹ in steps of 2, γ = 0..156 cm⁻¹ in steps of 6.
    pub fn default_grid() -> Self {
        Self::uniform(160.0, 6.0, 2000.0, 2.0).expect("default grid is valid")
    }

    pub fn gammas_cm1(&self) -> &[f64] {
        &self.gammas_cm1
    }

    pub fn omegas_cm1(&self) -> &[f64] {
        &self.omegas_cm1
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.gammas_cm1.len(), self.omegas_cm1.len())
    }

    pub fn len(&self) -> usize {
        self.gammas_cm1.len() * self.omegas_cm1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid cell nearest to (γ, Ω).
    pub fn nearest(&self, gamma_cm1: f64, omega_cm1: f64) -> (usize, usize) {
        let near = |axis: &[f64], x: f64| {
            axis.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0)
        };
        (
            near(&self.gammas_cm1, gamma_cm1),
            near(&self.omegas_cm1, omega_cm1),
        )
    }
}

impl Default for AtomGrid {
    fn default() -> Self {
        Self::default_grid()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Storage {
    #[default]
    Factored,
    Dense,
}

/// Column normalization applied when building a [`Measurement`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Scale every non-zero column to unit Euclidean norm.
    #[default]
    UnitNorm,
    None,
}

#[derive(Debug, Clone)]
pub struct Measurement {
    grid: AtomGrid,
    times_fs: Vec<f64>,
    scales: Array2<f64>,
    decay: Array2<f64>,
    cosines: Array2<f64>,
    /// Row blocks (start, end, active γ prefix) of the factored tables.
    blocks: Vec<(usize, usize, usize)>,
    dense: Option<Array2<f64>>,
}

/// Decay factors below this are treated as exact zeros in the factored
/// products.
const DECAY_CUTOFF: f64 = 1e-20;
const BLOCK_ROWS: usize = 256;

fn decay_blocks(decay: &Array2<f64>) -> Vec<(usize, usize, usize)> {
    let (nt, ng) = decay.dim();
    let mut blocks = Vec::new();
    let mut start = 0;
    while start < nt {
        let end = (start + BLOCK_ROWS).min(nt);
        let rows = decay.slice(s![start..end, ..]);
        let active = (0..ng)
            .rev()
            .find(|&i| rows.column(i).iter().any(|&d| d > DECAY_CUTOFF))
            .map_or(0, |i| i + 1);
        blocks.push((start, end, active));
        start = end;
    }
    blocks
}

impl Measurement {
    pub fn new(
        grid: AtomGrid,
        times_fs: Vec<f64>,
        normalization: Normalization,
        storage: Storage,
    ) -> Result<Self> {
        if times_fs.is_empty() {
            return Err(domain("measurement needs at least one time sample"));
        }
        if times_fs.iter().any(|t| !t.is_finite()) {
            return Err(domain("measurement times must be finite"));
        }
        let (ng, nw) = grid.shape();
        let nt = times_fs.len();
        let gammas: Vec<f64> = grid
            .gammas_cm1
            .iter()
            .map(|&g| wavenumber_to_angular(g))
            .collect();
        let omegas: Vec<f64> = grid
            .omegas_cm1
            .iter()
            .map(|&w| wavenumber_to_angular(w))
            .collect();
        let decay = Array2::from_shape_fn((nt, ng), |(k, i)| (-gammas[i] * times_fs[k]).exp());
        let cosines = Array2::from_shape_fn((nt, nw), |(k, j)| (omegas[j] * times_fs[k]).cos());

        let scales = match normalization {
            Normalization::None => Array2::ones((ng, nw)),
            Normalization::UnitNorm => {
                let norms_sq = decay.mapv(|v| v * v).t().dot(&cosines.mapv(|v| v * v));
                norms_sq.mapv(|n| if n > 0.0 { 1.0 / n.sqrt() } else { 0.0 })
            }
        };

        let blocks = decay_blocks(&decay);
        let mut meas = Self {
            grid,
            times_fs,
            scales,
            decay,
            cosines,
            blocks,
            dense: None,
        };
        if storage == Storage::Dense {
            meas.dense = Some(meas.materialize());
        }
        Ok(meas)
    }

    /// Operator sampled at the lag times of `corr`.
    pub fn for_correlation(
        grid: AtomGrid,
        corr: &CorrelationSeries,
        normalization: Normalization,
        storage: Storage,
    ) -> Result<Self> {
        Self::new(grid, corr.times_fs(), normalization, storage)
    }

    pub fn grid(&self) -> &AtomGrid {
        &self.grid
    }

    pub fn times_fs(&self) -> &[f64] {
        &self.times_fs
    }

    pub fn n_times(&self) -> usize {
        self.times_fs.len()
    }

    pub fn scales(&self) -> ArrayView2<'_, f64> {
        self.scales.view()
    }

    pub fn storage(&self) -> Storage {
        if self.dense.is_some() {
            Storage::Dense
        } else {
            Storage::Factored
        }
    }

    /// Time samples of the scaled atom (i, j).
    pub fn column(&self, i: usize, j: usize) -> Array1<f64> {
        let s = self.scales[[i, j]];
        Zip::from(self.decay.column(i))
            .and(self.cosines.column(j))
            .map_collect(|d, c| s * d * c)
    }

    fn materialize(&self) -> Array2<f64> {
        let (ng, nw) = self.grid.shape();
        let mut a = Array2::zeros((self.n_times(), ng * nw));
        for i in 0..ng {
            for j in 0..nw {
                a.column_mut(i * nw + j).assign(&self.column(i, j));
            }
        }
        a
    }

    /// y_k = Σ_ij λ_ij · scale_ij · e^{−γ_i t_k} cos(Ω_j t_k).
    pub fn apply(&self, coeffs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let shape = self.grid.shape();
        if coeffs.dim() != shape {
            return Err(Error::Dimension {
                expected: self.grid.len(),
                actual: coeffs.len(),
            });
        }
        if let Some(a) = &self.dense {
            let flat = coeffs.as_standard_layout();
            let flat = flat
                .view()
                .into_shape_with_order(self.grid.len())
                .expect("contiguous");
            return Ok(a.dot(&flat));
        }
        let weighted = &coeffs * &self.scales;
        let mut out = Array1::zeros(self.n_times());
        for &(k0, k1, active) in &self.blocks {
            if active == 0 {
                continue;
            }
            // (times × omegas)·(omegas × gammas) → times × gammas
            let per_gamma = self
                .cosines
                .slice(s![k0..k1, ..])
                .dot(&weighted.slice(s![..active, ..]).t());
            let decay = self.decay.slice(s![k0..k1, ..active]);
            Zip::from(out.slice_mut(s![k0..k1]))
                .and(per_gamma.rows())
                .and(decay.rows())
                .for_each(|y, p, d| *y = p.dot(&d));
        }
        Ok(out)
    }

    /// Transpose action: g_ij = scale_ij Σ_k e^{−γ_i t_k} cos(Ω_j t_k) r_k.
    pub fn apply_adjoint(&self, residual: ArrayView1<'_, f64>) -> Result<Array2<f64>> {
        if residual.len() != self.n_times() {
            return Err(Error::Dimension {
                expected: self.n_times(),
                actual: residual.len(),
            });
        }
        if let Some(a) = &self.dense {
            let flat = a.t().dot(&residual);
            return Ok(flat
                .into_shape_with_order(self.grid.shape())
                .expect("grid shape"));
        }
        let mut g = Array2::zeros(self.grid.shape());
        for &(k0, k1, active) in &self.blocks {
            if active == 0 {
                continue;
            }
            let weighted = &self.decay.slice(s![k0..k1, ..active])
                * &residual.slice(s![k0..k1]).insert_axis(Axis(1));
            general_mat_mul(
                1.0,
                &weighted.t(),
                &self.cosines.slice(s![k0..k1, ..]),
                1.0,
                &mut g.slice_mut(s![..active, ..]),
            );
        }
        Ok(g * &self.scales)
    }

    /// Power-iteration estimate of the spectral norm ‖A‖₂ (50 iterations or
    /// 1e-6 relative stagnation).
    pub fn operator_norm_estimate(&self) -> f64 {
        let shape = self.grid.shape();
        // deterministic, sign-varying start
        let mut v = Array2::from_shape_fn(shape, |(i, j)| {
            let h = ((i * 7919 + j * 104_729) % 1013) as f64 / 1013.0;
            0.5 + h
        });
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v /= norm;
        let mut estimate = 0.0;
        for _ in 0..50 {
            let av = self.apply(v.view()).expect("shape checked");
            let w = self.apply_adjoint(av.view()).expect("shape checked");
            let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if wn == 0.0 {
                return 0.0;
            }
            let next = wn.sqrt();
            v = w / wn;
            let converged = (next - estimate).abs() <= 1e-6 * next;
            estimate = next;
            if converged {
                break;
            }
        }
        estimate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_meas(storage: Storage, normalization: Normalization) -> Measurement {
        let grid = AtomGrid::uniform(30.0, 6.0, 100.0, 5.0).unwrap();
        let times: Vec<f64> = (0..120).map(|k| 4.0 * k as f64).collect();
        Measurement::new(grid, times, normalization, storage).unwrap()
    }

    fn random_grid(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<f64> {
        Array2::from_shape_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn default_grid_counts() {
        let g = AtomGrid::default_grid();
        assert_eq!(g.omegas_cm1().len(), 1001);
        assert_eq!(g.gammas_cm1().len(), 27);
        assert_eq!(g.len(), 27_027);
        assert_eq!(*g.gammas_cm1().last().unwrap(), 156.0);
        assert_eq!(*g.omegas_cm1().last().unwrap(), 2000.0);
    }

    #[test]
    fn grid_validation() {
        assert!(AtomGrid::new(vec![0.0, 6.0], vec![0.0, 2.0]).is_ok());
        assert!(AtomGrid::new(vec![6.0, 0.0], vec![0.0]).is_err());
        assert!(AtomGrid::new(vec![0.0], vec![-2.0, 0.0]).is_err());
        assert!(AtomGrid::new(vec![], vec![0.0]).is_err());
    }

    #[test]
    fn zero_coefficients_give_zero_series() {
        let m = small_meas(Storage::Factored, Normalization::UnitNorm);
        let y = m.apply(Array2::zeros(m.grid().shape()).view()).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
        let g = m.apply_adjoint(Array1::zeros(m.n_times()).view()).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn static_atom_is_constant() {
        let m = small_meas(Storage::Factored, Normalization::None);
        let mut c = Array2::zeros(m.grid().shape());
        c[[0, 0]] = 1.0;
        let y = m.apply(c.view()).unwrap();
        assert!(y.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn sparse_apply_matches_per_atom_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for storage in [Storage::Factored, Storage::Dense] {
            let m = small_meas(storage, Normalization::UnitNorm);
            let (ng, nw) = m.grid().shape();
            let mut c = Array2::zeros((ng, nw));
            let mut picks = Vec::new();
            for _ in 0..5 {
                let (i, j) = (rng.random_range(0..ng), rng.random_range(0..nw));
                let a = rng.random_range(-2.0..2.0);
                c[[i, j]] += a;
                picks.push((i, j, a));
            }
            let y = m.apply(c.view()).unwrap();
            for (k, &t) in m.times_fs().iter().enumerate() {
                let mut expect = 0.0;
                for &(i, j, a) in &picks {
                    let g = wavenumber_to_angular(m.grid().gammas_cm1()[i]);
                    let w = wavenumber_to_angular(m.grid().omegas_cm1()[j]);
                    expect += a * m.scales()[[i, j]] * (-g * t).exp() * (w * t).cos();
                }
                assert!((y[k] - expect).abs() <= 1e-12, "{} vs {}", y[k], expect);
            }
        }
    }

    #[test]
    fn adjointness() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = small_meas(Storage::Factored, Normalization::UnitNorm);
        let d = small_meas(Storage::Dense, Normalization::UnitNorm);
        for _ in 0..100 {
            let lam = random_grid(&mut rng, m.grid().shape());
            let r = Array1::from_shape_fn(m.n_times(), |_| rng.random_range(-1.0..1.0));
            let lhs = m.apply(lam.view()).unwrap().dot(&r);
            let g = m.apply_adjoint(r.view()).unwrap();
            let rhs = (&lam * &g).sum();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
            let gd = d.apply_adjoint(r.view()).unwrap();
            assert!((&g - &gd).iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn adjoint_of_first_sample_is_atom_values_at_zero() {
        let m = small_meas(Storage::Factored, Normalization::UnitNorm);
        let mut r = Array1::zeros(m.n_times());
        r[0] = 1.0;
        let g = m.apply_adjoint(r.view()).unwrap();
        // t_0 = 0: every atom equals its scale
        for (a, s) in g.iter().zip(m.scales().iter()) {
            assert_relative_eq!(*a, *s, max_relative = 1e-14);
        }
    }

    #[test]
    fn columns_have_unit_norm() {
        let m = small_meas(Storage::Factored, Normalization::UnitNorm);
        let (ng, nw) = m.grid().shape();
        for i in 0..ng {
            for j in 0..nw {
                let n = m.column(i, j).iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wrong_dimensions_rejected() {
        let m = small_meas(Storage::Factored, Normalization::UnitNorm);
        assert!(m.apply(Array2::zeros((2, 2)).view()).is_err());
        assert!(m.apply_adjoint(Array1::zeros(3).view()).is_err());
    }

    #[test]
    fn norm_of_single_atom_is_its_column_norm() {
        let grid = AtomGrid::new(vec![12.0], vec![150.0]).unwrap();
        let times: Vec<f64> = (0..300).map(|k| 2.0 * k as f64).collect();
        let m = Measurement::new(grid, times, Normalization::None, Storage::Factored).unwrap();
        let col = m.column(0, 0).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_relative_eq!(m.operator_norm_estimate(), col, max_relative = 1e-9);
    }

    #[test]
    fn norm_of_diagonal_operator() {
        // Undamped cosines sampled at t = 0 only give an all-ones row; use
        // two orthogonal atoms instead: constant and Nyquist-alternating.
        let dt = 4.0;
        let nyquist_cm1 = crate::units::angular_to_wavenumber(std::f64::consts::PI / dt);
        let grid = AtomGrid::new(vec![0.0], vec![0.0, nyquist_cm1]).unwrap();
        let times: Vec<f64> = (0..64).map(|k| dt * k as f64).collect();
        let m = Measurement::new(grid, times, Normalization::None, Storage::Factored).unwrap();
        // AᵀA = diag(64, 64)
        assert_relative_eq!(m.operator_norm_estimate(), 8.0, max_relative = 1e-9);
    }
}
