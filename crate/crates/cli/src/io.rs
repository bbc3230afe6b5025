use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use bathspec::baseline::TabulatedSpectralDensity;
use bathspec::timeseries::CorrelationSeries;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Files one invocation reads and writes. Outputs are deleted again if the
/// run fails.
pub struct Run {
    out_dir: PathBuf,
    inputs: Vec<(PathBuf, String)>,
    outputs: Vec<PathBuf>,
}

#[derive(Serialize)]
struct InputRecord<'a> {
    path: &'a Path,
    sha256: &'a str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    timestamp_unix: u64,
    seed: Option<u64>,
    threads: usize,
    parameters: serde_json::Value,
    inputs: Vec<InputRecord<'a>>,
    outputs: &'a [PathBuf],
}

impl Run {
    pub fn new(out_dir: &Path) -> Result<Self> {
        fs::create_dir_all(out_dir)
            .with_context(|| format!("cannot create {}", out_dir.display()))?;
        Ok(Self {
            out_dir: out_dir.to_owned(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    /// Records the input's hash and returns its contents.
    pub fn read_input(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.push((path.to_owned(), hex));
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8 text", path.display()))
    }

    /// Hashes an input that a library routine opens itself.
    pub fn note_input(&mut self, path: &Path) -> Result<()> {
        self.read_input(path).map(|_| ())
    }

    pub fn output_path(&mut self, name: &str) -> PathBuf {
        let path = self.out_dir.join(name);
        self.outputs.push(path.clone());
        path
    }

    pub fn write_csv(&mut self, name: &str, header: &[String], columns: &[&[f64]]) -> Result<()> {
        let path = self.output_path(name);
        let rows = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != rows) || header.len() != columns.len() {
            bail!("internal error: ragged columns for {name}");
        }
        let mut w = csv::Writer::from_path(&path)
            .with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(header)?;
        for r in 0..rows {
            w.write_record(columns.iter().map(|c| c[r].to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.output_path(name);
        let file =
            File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.output_path(name);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn finish(
        mut self,
        subcommand: &str,
        seed: Option<u64>,
        threads: usize,
        parameters: serde_json::Value,
    ) -> Result<()> {
        let manifest_name = format!("manifest_{subcommand}.json");
        let manifest_path = self.out_dir.join(&manifest_name);
        let manifest = Manifest {
            tool: "bathspec",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            seed,
            threads,
            parameters,
            inputs: self
                .inputs
                .iter()
                .map(|(path, sha256)| InputRecord { path, sha256 })
                .collect(),
            outputs: &self.outputs,
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        self.outputs.push(manifest_path.clone());
        fs::write(&manifest_path, text + "\n")
            .with_context(|| format!("cannot write {}", manifest_path.display()))?;
        self.outputs.clear();
        Ok(())
    }

    pub fn abandon(self) {
        for path in &self.outputs {
            let _ = fs::remove_file(path);
        }
    }
}

/// Correlation CSV with columns `t_fs,C` (dt taken from the first two
/// times) or a single column of values with `dt_fs` given.
pub fn parse_correlation(
    text: &str,
    origin: &Path,
    dt_fs: Option<f64>,
) -> Result<CorrelationSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: malformed CSV", origin.display()))?;
        let nums: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let nums = match nums {
            Ok(n) => n,
            Err(_) if idx == 0 => continue,
            Err(e) => bail!("{}: row {}: {e}", origin.display(), idx + 1),
        };
        match nums.as_slice() {
            [v] => values.push(*v),
            [t, v, ..] => {
                times.push(*t);
                values.push(*v);
            }
            [] => {}
        }
    }
    let dt = if times.len() == values.len() && times.len() >= 2 {
        let dt = times[1] - times[0];
        if let Some(given) = dt_fs {
            if (given - dt).abs() > 1e-9 * dt.abs() {
                bail!(
                    "{}: --dt-fs {given} contradicts the time column spacing {dt}",
                    origin.display()
                );
            }
        }
        dt
    } else {
        dt_fs.with_context(|| {
            format!(
                "{}: single-column correlation needs --dt-fs",
                origin.display()
            )
        })?
    };
    Ok(CorrelationSeries::new(values, dt)?)
}

/// Tabulated spectral density CSV with columns `frequency_cm1,J`.
pub fn parse_spectral_density(
    text: &str,
    origin: &Path,
    temperature_k: f64,
) -> Result<TabulatedSpectralDensity> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut freqs = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.with_context(|| format!("{}: malformed CSV", origin.display()))?;
        let field = |i: usize| -> Result<f64> {
            record
                .get(i)
                .with_context(|| format!("{}: expected frequency_cm1,J columns", origin.display()))?
                .parse::<f64>()
                .with_context(|| format!("{}: not a number", origin.display()))
        };
        freqs.push(field(0)?);
        values.push(field(1)?);
    }
    Ok(TabulatedSpectralDensity::new(freqs, values, temperature_k)?)
}

/// Density matrix CSV: N rows, each re_1,im_1,...,re_N,im_N.
pub fn parse_density(
    text: &str,
    origin: &Path,
) -> Result<nalgebra::DMatrix<num_complex::Complex64>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.with_context(|| format!("{}: malformed CSV", origin.display()))?;
        let nums: Vec<f64> = record
            .iter()
            .map(str::parse::<f64>)
            .collect::<Result<_, _>>()
            .with_context(|| format!("{}: not a number", origin.display()))?;
        rows.push(nums);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != 2 * n) {
        bail!(
            "{}: expected {n} rows of {} values (re,im pairs)",
            origin.display(),
            2 * n
        );
    }
    Ok(nalgebra::DMatrix::from_fn(n, n, |i, j| {
        num_complex::Complex64::new(rows[i][2 * j], rows[i][2 * j + 1])
    }))
}
