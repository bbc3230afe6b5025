use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bathspec::baseline::{cosine_transform_sd, uniform_grid, window, Window};
use bathspec::bathmodel::{tabulate_kernel, DrudeLorentzModel, KernelParams};
use bathspec::dictionary::{AtomGrid, Measurement, Normalization, Storage};
use bathspec::dynamics::{
    localized_state, observables, parse_matrix, propagate, DensityMatrix, ExcitonSystem,
    Observable, SiteBath,
};
use bathspec::solver::{solve, SolverConfig, SparseSpectrum};
use bathspec::synth::{synth_correlation, synth_gap_trajectory, SynthSpec};
use bathspec::timeseries::{
    autocorrelation, default_max_lag, load_trajectory, truncate, CorrelationSeries,
};
use bathspec::Atom;
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::io::{parse_correlation, parse_density, parse_spectral_density, Run};

fn write_correlation(run: &mut Run, name: &str, corr: &CorrelationSeries) -> Result<()> {
    let times = corr.times_fs();
    run.write_csv(name, &["t_fs".into(), "C".into()], &[&times, corr.values()])
}

fn load_correlation(run: &mut Run, input: &CorrelationInput) -> Result<CorrelationSeries> {
    let text = run.read_input(&input.input)?;
    let corr = parse_correlation(&text, &input.input, input.dt_fs)?;
    Ok(match input.truncate {
        Some(f) => truncate(&corr, f)?,
        None => corr,
    })
}

fn frequency_grid(axis: &FrequencyAxis) -> Result<Vec<f64>> {
    Ok(uniform_grid(axis.freq_max, axis.freq_step)?)
}

fn atom_grid(g: &GridArgs) -> Result<AtomGrid> {
    Ok(AtomGrid::uniform(
        g.gamma_max,
        g.gamma_step,
        g.omega_max,
        g.omega_step,
    )?)
}

fn solver_config(s: &SolverArgs) -> SolverConfig {
    SolverConfig {
        mu: s.mu,
        eta: s.eta,
        debias: !s.no_debias,
        max_iters: s.max_iters,
        stall_iters: s.stall_iters,
        ..SolverConfig::default()
    }
}

#[derive(Serialize, Deserialize)]
struct RecoveryRecord {
    input: PathBuf,
    dt_fs: f64,
    n_lags: usize,
    grid: GridArgs,
    solver: SolverConfig,
    #[serde(flatten)]
    spectrum: SparseSpectrum,
}

fn recover_one(
    corr: &CorrelationSeries,
    grid: &GridArgs,
    cfg: &SolverConfig,
) -> Result<SparseSpectrum> {
    let meas = Measurement::for_correlation(
        atom_grid(grid)?,
        corr,
        Normalization::UnitNorm,
        Storage::Factored,
    )?;
    let spectrum = solve(corr, &meas, cfg)?;
    info!(
        "recovered {} atoms in {} iterations ({}), relative residual {:.3e}",
        spectrum.atoms.len(),
        spectrum.iterations,
        spectrum.termination,
        spectrum.relative_residual
    );
    Ok(spectrum)
}

pub fn autocorr(run: &mut Run, a: &AutocorrArgs) -> Result<()> {
    run.note_input(&a.input)?;
    let traj = load_trajectory(&a.input, a.dt_fs)?;
    let max_lag = a.max_lag.unwrap_or_else(|| default_max_lag(&traj));
    let mut corr = autocorrelation(&traj, max_lag)?;
    if let Some(f) = a.truncate {
        corr = truncate(&corr, f)?;
    }
    write_correlation(run, &a.output, &corr)
}

pub fn fft(run: &mut Run, a: &FftArgs) -> Result<()> {
    let corr = load_correlation(run, &a.corr)?;
    let kind: Window = a.window.parse()?;
    let freqs = frequency_grid(&a.axis)?;
    let sd = cosine_transform_sd(&window(&corr, kind), a.temperature, &freqs)?;
    run.write_csv(
        &a.output,
        &["frequency_cm1".into(), "J".into()],
        &[sd.frequencies_cm1(), sd.values()],
    )
}

pub fn recover(run: &mut Run, a: &RecoverArgs) -> Result<()> {
    let cfg = solver_config(&a.solver);
    cfg.validate()?;
    let mut corrs = Vec::with_capacity(a.input.len());
    for path in &a.input {
        let text = run.read_input(path)?;
        let corr = parse_correlation(&text, path, a.dt_fs)?;
        corrs.push(match a.truncate {
            Some(f) => truncate(&corr, f)?,
            None => corr,
        });
    }
    let spectra: Vec<SparseSpectrum> = corrs
        .par_iter()
        .map(|c| recover_one(c, &a.grid, &cfg))
        .collect::<Result<_>>()?;
    let single = a.input.len() == 1;
    for ((path, corr), spectrum) in a.input.iter().zip(&corrs).zip(spectra) {
        let name = if single {
            a.output.clone()
        } else {
            let stem = path
                .file_stem()
                .map_or("input".into(), |s| s.to_string_lossy().into_owned());
            format!("atoms_{stem}.json")
        };
        let record = RecoveryRecord {
            input: path.clone(),
            dt_fs: corr.dt_fs(),
            n_lags: corr.max_lag(),
            grid: a.grid.clone(),
            solver: cfg.clone(),
            spectrum,
        };
        run.write_json(&name, &record)?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct AtomList {
    atoms: Vec<Atom>,
}

#[derive(Serialize)]
struct ModelRecord<'a> {
    atoms: &'a [Atom],
    temperature_k: f64,
    reorganization_energy_cm1: f64,
}

fn model_table(model: &DrudeLorentzModel, freqs: &[f64]) -> Vec<f64> {
    freqs.iter().map(|&w| model.evaluate_sd(w)).collect()
}

pub fn model(run: &mut Run, a: &ModelArgs) -> Result<()> {
    let text = run.read_input(&a.atoms)?;
    let list: AtomList = serde_json::from_str(&text).with_context(|| {
        format!(
            "{}: expected an object with an atoms list",
            a.atoms.display()
        )
    })?;
    let model = DrudeLorentzModel::new(list.atoms, a.temperature)?;
    let record = ModelRecord {
        atoms: model.atoms(),
        temperature_k: model.temperature_k(),
        reorganization_energy_cm1: model.reorganization_energy()?,
    };
    run.write_json(&a.output, &record)?;
    let freqs = frequency_grid(&a.axis)?;
    let j = model_table(&model, &freqs);
    run.write_csv(
        "spectral_density_model.csv",
        &["frequency_cm1".into(), "J".into()],
        &[&freqs, &j],
    )
}

fn load_model(run: &mut Run, path: &Path) -> Result<DrudeLorentzModel> {
    let text = run.read_input(path)?;
    DrudeLorentzModel::from_json(&text)
        .with_context(|| format!("{}: not a model file", path.display()))
}

pub fn kernel(run: &mut Run, a: &KernelArgs) -> Result<()> {
    let model = load_model(run, &a.model)?;
    let params = KernelParams {
        omega_max_cm1: a.cutoff,
        temperature_k: a.temperature,
        ..KernelParams::default()
    };
    let table = tabulate_kernel(&model, a.t_max, a.dt, &params)?;
    let times = table.times_fs();
    let re: Vec<f64> = table.samples().iter().map(|z| z.re).collect();
    let im: Vec<f64> = table.samples().iter().map(|z| z.im).collect();
    run.write_csv(
        &a.output,
        &["t_fs".into(), "re_D".into(), "im_D".into()],
        &[&times, &re, &im],
    )
}

fn site_baths(run: &mut Run, a: &PropagateArgs, n: usize) -> Result<(Vec<SiteBath>, f64)> {
    let temperature_hint = a.temperature;
    let mut baths = Vec::new();
    if !a.model.is_empty() {
        for path in &a.model {
            baths.push(SiteBath::Analytic(load_model(run, path)?));
        }
    } else if !a.sd_table.is_empty() {
        let t = temperature_hint.context("--sd-table needs --temperature")?;
        for path in &a.sd_table {
            let text = run.read_input(path)?;
            baths.push(SiteBath::Tabulated(parse_spectral_density(&text, path, t)?));
        }
    } else {
        bail!("give --model or --sd-table");
    }
    let temperature = match (temperature_hint, &baths[0]) {
        (Some(t), _) => t,
        (None, SiteBath::Analytic(m)) => m.temperature_k(),
        (None, SiteBath::Tabulated(sd)) => sd.temperature_k(),
    };
    match baths.len() {
        1 => Ok((vec![baths.remove(0); n], temperature)),
        k if k == n => Ok((baths, temperature)),
        k => bail!("{k} baths given for {n} sites; give one or {n}"),
    }
}

pub fn propagate_cmd(run: &mut Run, a: &PropagateArgs) -> Result<()> {
    let which: Vec<Observable> = a
        .observables
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<Observable>())
        .collect::<bathspec::Result<_>>()?;
    let text = run.read_input(&a.hamiltonian)?;
    let h = parse_matrix(&text, &a.hamiltonian)?;
    let n = h.nrows();
    let (baths, temperature) = site_baths(run, a, n)?;
    let sys = ExcitonSystem::new(h, baths, temperature)?;
    let rho0: DensityMatrix = match (&a.init_rho, a.init_site) {
        (Some(path), _) => {
            let text = run.read_input(path)?;
            parse_density(&text, path)?
        }
        (None, Some(k)) => localized_state(n, k.checked_sub(1).context("--init-site is 1-based")?)?,
        (None, None) => localized_state(n, 0)?,
    };
    let traj = propagate(&sys, &rho0, a.t_max, a.dt)?;
    info!(
        "smallest density-matrix eigenvalue {:.3e}",
        traj.smallest_eigenvalue()
    );
    let cols = observables(&traj, &which)?;
    let mut header = vec!["time_fs".to_string()];
    header.extend(cols.iter().map(|c| c.0.clone()));
    let mut columns: Vec<&[f64]> = vec![&traj.times_fs];
    columns.extend(cols.iter().map(|c| c.1.as_slice()));
    header.push("min_eigenvalue".into());
    columns.push(&traj.min_eigenvalues);
    run.write_csv(&a.output, &header, &columns)
}

pub fn synth(run: &mut Run, a: &SynthArgs, seed: Option<u64>) -> Result<()> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = run.read_input(path)?;
            serde_json::from_str::<SynthSpec>(&text)
                .with_context(|| format!("{}: not a synth spec", path.display()))?
        }
        None => {
            if a.atom.is_empty() {
                bail!("give --spec or at least one --atom gamma,omega,amplitude");
            }
            let atoms = a
                .atom
                .iter()
                .map(|s| parse_atom(s))
                .collect::<Result<Vec<_>>>()?;
            SynthSpec {
                atoms,
                n_samples: a.n_samples,
                dt_fs: a.dt_fs,
                noise_sigma: a.noise,
                rng_seed: 0,
            }
        }
    };
    if let Some(s) = seed {
        spec.rng_seed = s;
    }
    spec.validate()?;
    run.write_json("synth_spec.json", &spec)?;
    let corr = synth_correlation(&spec)?;
    write_correlation(run, "correlation.csv", &corr)?;
    if let Some(steps) = a.gap_steps {
        let traj = synth_gap_trajectory(&spec, steps)?;
        let mut text = format!(
            "# synthetic energy gaps in cm^-1, dt_fs = {}, seed = {}\n",
            spec.dt_fs, spec.rng_seed
        );
        for v in traj.samples() {
            text.push_str(&v.to_string());
            text.push('\n');
        }
        run.write_text("gaps.csv", &text)?;
    }
    Ok(())
}

fn parse_atom(s: &str) -> Result<Atom> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("invalid atom {s:?}"))?;
    let [g, w, amp] = parts[..] else {
        bail!("atom {s:?} needs gamma,omega,amplitude");
    };
    let atom = Atom::new(g, w, amp);
    atom.validate()?;
    Ok(atom)
}

pub fn compare(run: &mut Run, a: &CompareArgs) -> Result<()> {
    let full_input = CorrelationInput {
        truncate: None,
        ..a.corr.clone()
    };
    let full = load_correlation(run, &full_input)?;
    let short = truncate(&full, a.corr.truncate.unwrap_or(0.25))?;
    let freqs = frequency_grid(&a.axis)?;
    let fft_full = cosine_transform_sd(&full, a.temperature, &freqs)?;
    let fft_short = cosine_transform_sd(&short, a.temperature, &freqs)?;

    let cfg = solver_config(&a.solver);
    cfg.validate()?;
    let spectrum = recover_one(&short, &a.grid, &cfg)?;
    let model = DrudeLorentzModel::new(spectrum.atoms.clone(), a.temperature)?;
    let recovered = model_table(&model, &freqs);

    run.write_csv(
        "compare.csv",
        &[
            "frequency_cm1".into(),
            "J_fft_full".into(),
            "J_fft_truncated".into(),
            "J_recovered".into(),
        ],
        &[&freqs, fft_full.values(), fft_short.values(), &recovered],
    )?;
    let record = RecoveryRecord {
        input: a.corr.input.clone(),
        dt_fs: short.dt_fs(),
        n_lags: short.max_lag(),
        grid: a.grid.clone(),
        solver: cfg,
        spectrum,
    };
    run.write_json("atoms_compare.json", &record)
}
