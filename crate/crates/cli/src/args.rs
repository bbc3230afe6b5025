use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Every flag can also be set through an environment variable named
/// BATHSPEC_<FLAG>, e.g. BATHSPEC_OUT_DIR or BATHSPEC_ETA.
#[derive(Debug, Parser)]
#[command(
    name = "bathspec",
    version,
    about = "Sparse Drude-Lorentz spectral densities and TCL-2 exciton dynamics"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Directory receiving outputs and the run manifest.
    #[arg(long, global = true, env = "BATHSPEC_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
    /// Random seed for synthetic data.
    #[arg(long, global = true, env = "BATHSPEC_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "BATHSPEC_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// error, warn, info, debug or trace.
    #[arg(
        long,
        global = true,
        env = "BATHSPEC_LOG_LEVEL",
        default_value = "warn"
    )]
    pub log_level: log::LevelFilter,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Energy-gap trajectory → autocorrelation CSV.
    Autocorr(AutocorrArgs),
    /// Cosine-transform spectral density of a correlation.
    Fft(FftArgs),
    /// Sparse Drude-Lorentz recovery from correlations.
    Recover(RecoverArgs),
    /// Recovered atoms → Drude-Lorentz model, J(ω) table and reorganization energy.
    Model(ModelArgs),
    /// Bath kernel D(t) of a model.
    Kernel(KernelArgs),
    /// TCL-2 dynamics of an excitonic Hamiltonian.
    Propagate(PropagateArgs),
    /// Synthetic correlation functions and gap trajectories.
    Synth(SynthArgs),
    /// Full-length FFT, truncated FFT and truncated recovery side by side.
    Compare(CompareArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Autocorr(_) => "autocorr",
            Command::Fft(_) => "fft",
            Command::Recover(_) => "recover",
            Command::Model(_) => "model",
            Command::Kernel(_) => "kernel",
            Command::Propagate(_) => "propagate",
            Command::Synth(_) => "synth",
            Command::Compare(_) => "compare",
        }
    }
}

#[derive(Debug, Args, serde::Serialize)]
pub struct AutocorrArgs {
    /// Gap trajectory CSV, one value in cm⁻¹ per line.
    #[arg(long, env = "BATHSPEC_INPUT")]
    pub input: PathBuf,
    /// Sampling interval of the trajectory.
    #[arg(long, env = "BATHSPEC_DT_FS")]
    pub dt_fs: f64,
    /// Largest lag; half the trajectory when omitted.
    #[arg(long, env = "BATHSPEC_MAX_LAG")]
    pub max_lag: Option<usize>,
    /// Keep only this leading fraction of the lags.
    #[arg(long, env = "BATHSPEC_TRUNCATE")]
    pub truncate: Option<f64>,
    #[arg(long, env = "BATHSPEC_OUTPUT", default_value = "correlation.csv")]
    pub output: String,
}

#[derive(Debug, Args, serde::Serialize, Clone)]
pub struct CorrelationInput {
    /// Correlation CSV (columns t_fs,C or a single C column).
    #[arg(long, env = "BATHSPEC_INPUT")]
    pub input: PathBuf,
    /// Lag spacing for single-column input.
    #[arg(long, env = "BATHSPEC_DT_FS")]
    pub dt_fs: Option<f64>,
    /// Keep only this leading fraction of the lags.
    #[arg(long, env = "BATHSPEC_TRUNCATE")]
    pub truncate: Option<f64>,
}

#[derive(Debug, Args, serde::Serialize, Clone)]
pub struct FrequencyAxis {
    /// Upper end of the J(ω) output table.
    #[arg(long, env = "BATHSPEC_FREQ_MAX", default_value_t = 2000.0)]
    pub freq_max: f64,
    #[arg(long, env = "BATHSPEC_FREQ_STEP", default_value_t = 0.5)]
    pub freq_step: f64,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct FftArgs {
    #[command(flatten)]
    pub corr: CorrelationInput,
    #[arg(long, env = "BATHSPEC_TEMPERATURE", default_value_t = 300.0)]
    pub temperature: f64,
    /// none, hann or exponential(<tau_fs>).
    #[arg(long, env = "BATHSPEC_WINDOW", default_value = "none")]
    pub window: String,
    #[command(flatten)]
    pub axis: FrequencyAxis,
    #[arg(
        long,
        env = "BATHSPEC_OUTPUT",
        default_value = "spectral_density_fft.csv"
    )]
    pub output: String,
}

#[derive(Debug, Args, serde::Serialize, serde::Deserialize, Clone)]
pub struct GridArgs {
    #[arg(long, env = "BATHSPEC_GAMMA_MAX", default_value_t = 160.0)]
    pub gamma_max: f64,
    #[arg(long, env = "BATHSPEC_GAMMA_STEP", default_value_t = 6.0)]
    pub gamma_step: f64,
    #[arg(long, env = "BATHSPEC_OMEGA_MAX", default_value_t = 2000.0)]
    pub omega_max: f64,
    #[arg(long, env = "BATHSPEC_OMEGA_STEP", default_value_t = 2.0)]
    pub omega_step: f64,
}

#[derive(Debug, Args, serde::Serialize, Clone)]
pub struct SolverArgs {
    /// Weight of the L1 term relative to total variation.
    #[arg(long, env = "BATHSPEC_MU", default_value_t = 1.0)]
    pub mu: f64,
    /// Residual tolerance relative to ‖C‖₂.
    #[arg(long, env = "BATHSPEC_ETA", default_value_t = 1e-7)]
    pub eta: f64,
    /// Least-squares refit on the recovered support (tolerance 1e-9 relative).
    #[arg(long, overrides_with = "no_debias")]
    pub debias: bool,
    #[arg(long, env = "BATHSPEC_NO_DEBIAS", overrides_with = "debias")]
    pub no_debias: bool,
    #[arg(long, env = "BATHSPEC_MAX_ITERS", default_value_t = 20000)]
    pub max_iters: usize,
    #[arg(long, env = "BATHSPEC_STALL_ITERS", default_value_t = 100)]
    pub stall_iters: usize,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct RecoverArgs {
    /// One or more correlation CSVs, solved concurrently.
    #[arg(long, env = "BATHSPEC_INPUT", num_args = 1.., required = true, value_delimiter = ',')]
    pub input: Vec<PathBuf>,
    #[arg(long, env = "BATHSPEC_DT_FS")]
    pub dt_fs: Option<f64>,
    #[arg(long, env = "BATHSPEC_TRUNCATE")]
    pub truncate: Option<f64>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output name for a single input; atoms_<stem>.json otherwise.
    #[arg(long, env = "BATHSPEC_OUTPUT", default_value = "atoms.json")]
    pub output: String,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct ModelArgs {
    /// Atoms JSON written by `recover`.
    #[arg(long, env = "BATHSPEC_ATOMS")]
    pub atoms: PathBuf,
    #[arg(long, env = "BATHSPEC_TEMPERATURE", default_value_t = 300.0)]
    pub temperature: f64,
    #[command(flatten)]
    pub axis: FrequencyAxis,
    #[arg(long, env = "BATHSPEC_OUTPUT", default_value = "model.json")]
    pub output: String,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct KernelArgs {
    /// Model JSON written by `model`.
    #[arg(long, env = "BATHSPEC_MODEL")]
    pub model: PathBuf,
    #[arg(long, env = "BATHSPEC_T_MAX", default_value_t = 1000.0)]
    pub t_max: f64,
    #[arg(long, env = "BATHSPEC_DT", default_value_t = 1.0)]
    pub dt: f64,
    /// Cutoff of the frequency integral.
    #[arg(long, env = "BATHSPEC_CUTOFF", default_value_t = 4000.0)]
    pub cutoff: f64,
    /// Temperature of the coth factor; the model's when omitted.
    #[arg(long, env = "BATHSPEC_TEMPERATURE")]
    pub temperature: Option<f64>,
    #[arg(long, env = "BATHSPEC_OUTPUT", default_value = "kernel.csv")]
    pub output: String,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct PropagateArgs {
    /// N×N site Hamiltonian CSV in cm⁻¹.
    #[arg(long, env = "BATHSPEC_HAMILTONIAN")]
    pub hamiltonian: PathBuf,
    /// Model JSON per site, or one shared by all sites.
    #[arg(
        long,
        env = "BATHSPEC_MODEL",
        value_delimiter = ',',
        conflicts_with = "sd_table"
    )]
    pub model: Vec<PathBuf>,
    /// Tabulated J CSV (frequency_cm1,J) per site, or one shared by all.
    #[arg(long, env = "BATHSPEC_SD_TABLE", value_delimiter = ',')]
    pub sd_table: Vec<PathBuf>,
    /// System temperature; the first bath's when omitted.
    #[arg(long, env = "BATHSPEC_TEMPERATURE")]
    pub temperature: Option<f64>,
    /// Start localized on this site (1-based).
    #[arg(long, env = "BATHSPEC_INIT_SITE", conflicts_with = "init_rho")]
    pub init_site: Option<usize>,
    /// Initial density matrix CSV: N rows of 2N values re,im,re,im,...
    #[arg(long, env = "BATHSPEC_INIT_RHO")]
    pub init_rho: Option<PathBuf>,
    #[arg(long, env = "BATHSPEC_T_MAX", default_value_t = 1000.0)]
    pub t_max: f64,
    #[arg(long, env = "BATHSPEC_DT", default_value_t = 1.0)]
    pub dt: f64,
    /// Comma-separated selectors: site:K, site:K-L, exciton:K, exciton:K-L.
    #[arg(
        long,
        env = "BATHSPEC_OBSERVABLES",
        default_value = "site:1,site:2,site:3,site:1-3"
    )]
    pub observables: String,
    #[arg(long, env = "BATHSPEC_OUTPUT", default_value = "dynamics.csv")]
    pub output: String,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct SynthArgs {
    /// SynthSpec JSON {atoms, n_samples, dt_fs, noise_sigma, rng_seed}.
    #[arg(long, env = "BATHSPEC_SPEC", conflicts_with = "atom")]
    pub spec: Option<PathBuf>,
    /// Atom as gamma,omega,amplitude (cm⁻¹, cm⁻¹, cm⁻²); repeatable.
    #[arg(long, allow_hyphen_values = true)]
    pub atom: Vec<String>,
    #[arg(long, env = "BATHSPEC_N_SAMPLES", default_value_t = 10000)]
    pub n_samples: usize,
    #[arg(long, env = "BATHSPEC_DT_FS", default_value_t = 4.0)]
    pub dt_fs: f64,
    /// Noise standard deviation as a fraction of C_0.
    #[arg(long, env = "BATHSPEC_NOISE", default_value_t = 0.0)]
    pub noise: f64,
    /// Also write a gap trajectory with this many steps.
    #[arg(long, env = "BATHSPEC_GAP_STEPS")]
    pub gap_steps: Option<usize>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub corr: CorrelationInput,
    #[arg(long, env = "BATHSPEC_TEMPERATURE", default_value_t = 300.0)]
    pub temperature: f64,
    #[command(flatten)]
    pub axis: FrequencyAxis,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}
