//! Energy-gap trajectories and their unbiased autocorrelation.

use std::fs;
use std::path::Path;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// A uniformly sampled energy-gap series (cm⁻¹).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapTrajectory {
    samples: Vec<f64>,
    dt_fs: f64,
    site_label: String,
}

impl GapTrajectory {
    pub fn new(samples: Vec<f64>, dt_fs: f64, site_label: impl Into<String>) -> Result<Self> {
        if !(dt_fs > 0.0 && dt_fs.is_finite()) {
            return Err(domain(format!(
                "sampling interval must be positive, got {dt_fs} fs"
            )));
        }
        if samples.len() < 2 {
            return Err(domain(format!(
                "a trajectory needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gap sample {i}")));
        }
        Ok(Self {
            samples,
            dt_fs,
            site_label: site_label.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn dt_fs(&self) -> f64 {
        self.dt_fs
    }

    pub fn site_label(&self) -> &str {
        &self.site_label
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_fs(&self) -> f64 {
        self.dt_fs * self.samples.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }
}

/// Lag-indexed correlation values C_k (cm⁻²) at t_k = k·dt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    values: Vec<f64>,
    dt_fs: f64,
}

impl CorrelationSeries {
    pub fn new(values: Vec<f64>, dt_fs: f64) -> Result<Self> {
        if !(dt_fs > 0.0 && dt_fs.is_finite()) {
            return Err(domain(format!(
                "lag interval must be positive, got {dt_fs} fs"
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("correlation lag {i}")));
        }
        Ok(Self { values, dt_fs })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dt_fs(&self) -> f64 {
        self.dt_fs
    }

    pub fn max_lag(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn times_fs(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|k| k as f64 * self.dt_fs)
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        Self {
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(k, &v)| f(k, v))
                .collect(),
            dt_fs: self.dt_fs,
        }
    }
}

/// Reads one gap per line. Blank lines and lines starting with `#` are
/// skipped; a single non-numeric first line is treated as a header.
pub fn load_trajectory(path: impl AsRef<Path>, dt_fs: f64) -> Result<GapTrajectory> {
    let path = path.as_ref();
    let samples = read_column(path, 2)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    GapTrajectory::new(samples, dt_fs, label)
}

/// Reads a single numeric column (the first field of each row).
pub(crate) fn read_column(path: &Path, min_rows: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut values = Vec::new();
    let mut seen_row = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.split(',').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: idx + 1,
                    message: format!("non-finite value {field:?}"),
                })
            }
            // header row
            Err(_) if !seen_row => {}
            Err(_) => {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: idx + 1,
                    message: format!("not a number: {field:?}"),
                })
            }
        }
        seen_row = true;
    }
    if values.len() < min_rows {
        return Err(Error::TooShort {
            path: path.to_owned(),
            needed: min_rows,
            found: values.len(),
        });
    }
    Ok(values)
}

/// Default number of lags: half the trajectory length.
pub fn default_max_lag(traj: &GapTrajectory) -> usize {
    (traj.len() / 2).max(1)
}

// Above this many multiply-adds the FFT path is used.
const DIRECT_SUM_LIMIT: usize = 1 << 24;

/// How the lagged sums are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AutocorrMethod {
    /// Direct sums when N·max_lag is small, FFT otherwise.
    #[default]
    Auto,
    Direct,
    Fft,
}

/// Unbiased autocorrelation
/// C_k = 1/(N−k) Σ_{i<N−k} (Δ_i − Δ̄)(Δ_{i+k} − Δ̄), for k = 0..max_lag−1,
/// with Δ̄ the mean over all N samples.
pub fn autocorrelation(traj: &GapTrajectory, max_lag: usize) -> Result<CorrelationSeries> {
    autocorrelation_with(traj, max_lag, AutocorrMethod::Auto)
}

pub fn autocorrelation_with(
    traj: &GapTrajectory,
    max_lag: usize,
    method: AutocorrMethod,
) -> Result<CorrelationSeries> {
    let n = traj.len();
    if max_lag == 0 || max_lag >= n {
        return Err(domain(format!(
            "max_lag must satisfy 1 <= max_lag < N = {n}, got {max_lag}"
        )));
    }
    let mean = traj.mean();
    let centered: Vec<f64> = traj.samples.iter().map(|v| v - mean).collect();
    let direct = match method {
        AutocorrMethod::Auto => n.saturating_mul(max_lag) <= DIRECT_SUM_LIMIT,
        AutocorrMethod::Direct => true,
        AutocorrMethod::Fft => false,
    };
    let sums = if direct {
        lagged_sums_direct(&centered, max_lag)
    } else {
        lagged_sums_fft(&centered, max_lag)
    };
    let values = sums
        .into_iter()
        .enumerate()
        .map(|(k, s)| s / (n - k) as f64)
        .collect();
    CorrelationSeries::new(values, traj.dt_fs)
}

fn lagged_sums_direct(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    (0..max_lag)
        .map(|k| x[..n - k].iter().zip(&x[k..]).map(|(a, b)| a * b).sum())
        .collect()
}

fn lagged_sums_fft(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let len = (n + max_lag).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);
    let mut buf: Vec<Complex64> = x
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(len)
        .collect();
    forward.process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    inverse.process(&mut buf);
    buf[..max_lag].iter().map(|z| z.re / len as f64).collect()
}

/// Keeps the first ⌊keep_fraction·max_lag⌋ lags.
pub fn truncate(corr: &CorrelationSeries, keep_fraction: f64) -> Result<CorrelationSeries> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(domain(format!(
            "keep fraction must lie in (0, 1], got {keep_fraction}"
        )));
    }
    let keep = (keep_fraction * corr.max_lag() as f64).floor() as usize;
    if keep == 0 {
        return Err(domain(format!(
            "keeping {keep_fraction} of {} lags leaves nothing",
            corr.max_lag()
        )));
    }
    CorrelationSeries::new(corr.values[..keep].to_vec(), corr.dt_fs)
}

/// RMS of the last `tail_fraction` of the lags. For a correlation whose
/// signal has decayed this estimates the per-lag statistical noise.
pub fn tail_noise_rms(corr: &CorrelationSeries, tail_fraction: f64) -> Result<f64> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(domain(format!(
            "tail fraction must lie in (0, 1], got {tail_fraction}"
        )));
    }
    let n = corr.max_lag();
    let count = ((tail_fraction * n as f64).ceil() as usize).clamp(1, n.max(1));
    if n == 0 {
        return Err(domain("empty correlation"));
    }
    let tail = &corr.values[n - count..];
    Ok((tail.iter().map(|v| v * v).sum::<f64>() / count as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::io::Write;

    fn brute_force(x: &[f64], max_lag: usize) -> Vec<f64> {
        let n = x.len();
        let mut mean = 0.0;
        for v in x {
            mean += v;
        }
        mean /= n as f64;
        let mut out = vec![0.0; max_lag];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..n - k {
                acc += (x[i] - mean) * (x[i + k] - mean);
            }
            *slot = acc / (n - k) as f64;
        }
        out
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_plain_column() {
        let f = write_tmp("1.0\n2.0\n3.0\n");
        let traj = load_trajectory(f.path(), 4.0).unwrap();
        assert_eq!(traj.samples(), &[1.0, 2.0, 3.0]);
        assert_eq!(traj.dt_fs(), 4.0);
    }

    #[test]
    fn load_skips_comments_and_header() {
        let f = write_tmp("# site 1\ngap_cm1\n1.5\n\n2.5\n");
        let traj = load_trajectory(f.path(), 2.0).unwrap();
        assert_eq!(traj.samples(), &[1.5, 2.5]);
    }

    #[test]
    fn load_errors_are_distinct() {
        let empty = write_tmp("");
        assert!(matches!(
            load_trajectory(empty.path(), 4.0),
            Err(Error::TooShort { found: 0, .. })
        ));
        let one = write_tmp("3.0\n");
        assert!(matches!(
            load_trajectory(one.path(), 4.0),
            Err(Error::TooShort { found: 1, .. })
        ));
        let bad = write_tmp("1.0\nabc\n2.0\n");
        assert!(matches!(
            load_trajectory(bad.path(), 4.0),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            load_trajectory("/nonexistent/gaps.csv", 4.0),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn forty_picoseconds_of_samples() {
        let traj = GapTrajectory::new(vec![0.0; 10_000], 4.0, "s1").unwrap();
        assert_eq!(traj.duration_fs(), 40_000.0);
    }

    #[test]
    fn constant_series_has_zero_correlation() {
        let traj = GapTrajectory::new(vec![5.0; 50], 4.0, "").unwrap();
        let c = autocorrelation(&traj, 25).unwrap();
        assert!(c.values().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn alternating_series() {
        let n = 2000;
        let x: Vec<f64> = (0..n)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let traj = GapTrajectory::new(x.clone(), 1.0, "").unwrap();
        let c = autocorrelation(&traj, 10).unwrap();
        let oracle = brute_force(&x, 10);
        for k in 0..10 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert_relative_eq!(c.values()[k], sign, epsilon = 1e-12);
            assert_relative_eq!(c.values()[k], oracle[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_bad_max_lag() {
        let traj = GapTrajectory::new(vec![1.0, 2.0, 3.0], 1.0, "").unwrap();
        assert!(autocorrelation(&traj, 3).is_err());
        assert!(autocorrelation(&traj, 0).is_err());
        assert!(autocorrelation(&traj, 2).is_ok());
    }

    #[test]
    fn fft_path_matches_direct_sum() {
        let x: Vec<f64> = (0..3000)
            .map(|i| ((i as f64) * 0.37).sin() * 40.0 + ((i * i) % 17) as f64)
            .collect();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let direct = lagged_sums_direct(&centered, 1500);
        let fft = lagged_sums_fft(&centered, 1500);
        let scale = direct[0].abs();
        for (a, b) in direct.iter().zip(&fft) {
            assert!((a - b).abs() <= 1e-10 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn truncation() {
        let c = CorrelationSeries::new(vec![1.0; 10_000], 4.0).unwrap();
        assert_eq!(truncate(&c, 0.25).unwrap().max_lag(), 2500);
        assert_eq!(truncate(&c, 1.0).unwrap(), c);
        assert!(truncate(&c, 0.0).is_err());
        assert!(truncate(&c, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(x in prop::collection::vec(-100.0f64..100.0, 2..256), frac in 0.0f64..1.0) {
            let n = x.len();
            let max_lag = ((frac * (n - 1) as f64) as usize).clamp(1, n - 1);
            let traj = GapTrajectory::new(x.clone(), 4.0, "").unwrap();
            let oracle = brute_force(&x, max_lag);
            let scale = oracle[0].abs().max(1e-300);
            for method in [AutocorrMethod::Auto, AutocorrMethod::Fft] {
                let c = autocorrelation_with(&traj, max_lag, method).unwrap();
                for (a, b) in c.values().iter().zip(&oracle) {
                    prop_assert!((a - b).abs() <= 1e-12 * scale, "{method:?}: {a} vs {b}");
                }
            }
        }

        #[test]
        fn shift_and_scale(x in prop::collection::vec(-10.0f64..10.0, 8..128), shift in -1e3f64..1e3, s in 0.1f64..10.0) {
            let traj = GapTrajectory::new(x.clone(), 1.0, "").unwrap();
            let base = autocorrelation(&traj, x.len() / 2).unwrap();
            let shifted = GapTrajectory::new(x.iter().map(|v| v + shift).collect(), 1.0, "").unwrap();
            let scaled = GapTrajectory::new(x.iter().map(|v| v * s).collect(), 1.0, "").unwrap();
            let cs = autocorrelation(&shifted, x.len() / 2).unwrap();
            let cm = autocorrelation(&scaled, x.len() / 2).unwrap();
            let scale = base.values()[0].abs().max(1e-12);
            for k in 0..base.max_lag() {
                prop_assert!((cs.values()[k] - base.values()[k]).abs() <= 1e-10 * scale);
                prop_assert!((cm.values()[k] - s * s * base.values()[k]).abs() <= 1e-10 * s * s * scale);
            }
        }
    }
}
