use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "sqztomo",
    version,
    about = "Homodyne tomography of degraded squeezed light"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Global {
    /// Root seed; every random stream is derived from it by name.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Fock truncation (command-specific default when omitted).
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Worker threads (falls back to SQZTOMO_THREADS, then all cores).
    #[arg(long, global = true, env = "SQZTOMO_THREADS")]
    pub threads: Option<usize>,
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Manifest path (default: <out-dir>/<command>.manifest.json).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate homodyne records and the truth density matrix of one state.
    Simulate(SimulateArgs),
    /// Generate a directory of paired records and truth states.
    GenCorpus(GenCorpusArgs),
    /// Maximum-likelihood reconstruction of a record.
    ReconstructMle(MleArgs),
    /// Train a network on a corpus directory.
    Train(TrainArgs),
    /// Network reconstruction of a record.
    ReconstructNn(NnArgs),
    /// Purity, squeezing levels, decomposition and optional fidelity.
    Evaluate(EvaluateArgs),
    /// Wigner function on a grid, as CSV.
    Wigner(WignerArgs),
    /// Fit loss and phase noise to measured squeezing levels.
    FitDegradation(FitArgs),
    /// MLE vs network fidelity and timing over lengths and levels.
    Compare(CompareArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::GenCorpus(_) => "gen-corpus",
            Command::ReconstructMle(_) => "reconstruct-mle",
            Command::Train(_) => "train",
            Command::ReconstructNn(_) => "reconstruct-nn",
            Command::Evaluate(_) => "evaluate",
            Command::Wigner(_) => "wigner",
            Command::FitDegradation(_) => "fit-degradation",
            Command::Compare(_) => "compare",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// Local-oscillator phase swept linearly over [0, π).
    Linear,
    /// Independent uniform phases in [0, π).
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordFormat {
    Csv,
    Bin,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Ideal squeezing level, dB.
    #[arg(long)]
    pub sq_db: f64,
    /// Squeezing phase φ (minimum-variance LO angle is φ/2).
    #[arg(long, default_value_t = 0.0)]
    pub angle: f64,
    #[arg(long, default_value_t = 0.0)]
    pub nbar: f64,
    #[arg(long, default_value_t = 0.0)]
    pub loss: f64,
    /// Two-point phase jitter ±θ, radians.
    #[arg(long, default_value_t = 0.0)]
    pub phase_noise: f64,
    /// Points per record.
    #[arg(long, default_value_t = 2048)]
    pub n: usize,
    /// Number of independent records of the same state.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, value_enum, default_value_t = ScheduleKind::Linear)]
    pub schedule: ScheduleKind,
    #[arg(long, value_enum, default_value_t = RecordFormat::Csv)]
    pub format: RecordFormat,
    /// Record path; with --count > 1 an index is appended to the stem.
    #[arg(long)]
    pub record: Option<PathBuf>,
    #[arg(long, default_value = "truth.dm")]
    pub truth: PathBuf,
    /// Largest trace allowed outside the truncation.
    #[arg(long, default_value_t = 1e-6)]
    pub max_tail: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenCorpusArgs {
    #[arg(long)]
    pub count: usize,
    /// Sample i is drawn from seed base_seed + i (default: --seed).
    #[arg(long)]
    pub base_seed: Option<u64>,
    #[arg(long, default_value_t = 8.0)]
    pub max_sq_db: f64,
    #[arg(long, default_value_t = 0.5)]
    pub max_nbar: f64,
    #[arg(long, default_value_t = 0.3)]
    pub max_loss: f64,
    #[arg(long, default_value_t = 0.1)]
    pub max_phase_noise: f64,
    #[arg(long, default_value_t = 2048)]
    pub len: usize,
    /// Fraction of records generated with --short-len points.
    #[arg(long, default_value_t = 0.25)]
    pub short_fraction: f64,
    #[arg(long, default_value_t = 256)]
    pub short_len: usize,
    #[arg(long, default_value_t = 0.1)]
    pub max_tail: f64,
    #[arg(long, default_value = "corpus")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MleArgs {
    /// Record file (.csv, or binary container otherwise).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "rho.dm")]
    pub out: PathBuf,
    /// Also write the density matrix as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 20)]
    pub phase_bins: usize,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    #[arg(long, default_value_t = 0.5)]
    pub dilution: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchKind {
    /// Four residual blocks, 160k parameters at dim 12.
    Desk,
    /// Thirty convolutions in five blocks, dim 35.
    PaperScale,
    /// Two small blocks, for smoke tests.
    Tiny,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    /// Keep the learning rate constant instead of cosine decay.
    #[arg(long)]
    pub constant_lr: bool,
    /// Trailing fraction of the corpus held out for validation.
    #[arg(long, default_value_t = 0.05)]
    pub validation_fraction: f64,
    #[arg(long, value_enum, default_value_t = ArchKind::Desk)]
    pub arch: ArchKind,
    #[arg(long, default_value = "model.bin")]
    pub out: PathBuf,
    #[arg(long, default_value = "history.json")]
    pub history: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NnArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "rho.dm")]
    pub out: PathBuf,
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Print the inference wall time.
    #[arg(long)]
    pub time: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub rho: PathBuf,
    /// Reference state for fidelity and trace distance.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value = "report.json")]
    pub report: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WignerArgs {
    #[arg(long)]
    pub rho: PathBuf,
    #[arg(long, default_value = "wigner.csv")]
    pub out: PathBuf,
    /// Grid points per axis.
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// Half-width of the square grid (default: six widths of the broadest quadrature).
    #[arg(long)]
    pub extent: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PurityRoute {
    /// Fock-space synthesis at --dim (fails at extreme squeezing).
    Fock,
    /// Exact phase-space purity, no truncation.
    PhaseSpace,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// CSV with header sq_db,as_db[,label,pump_mw].
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long, default_value = "fit.json")]
    pub out: PathBuf,
    /// Fitted curve with ±1σ widths, as CSV.
    #[arg(long)]
    pub band: Option<PathBuf>,
    /// Purity against anti-squeezing of the fitted model, as CSV.
    #[arg(long)]
    pub purity: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PurityRoute::Fock)]
    pub purity_route: PurityRoute,
    /// Largest ideal squeezing sampled by --band and --purity, dB.
    #[arg(long, default_value_t = 20.0)]
    pub max_ideal_db: f64,
    #[arg(long, default_value_t = 0.25)]
    pub step_db: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    /// Trained network for the NN arm.
    #[arg(long)]
    pub model: PathBuf,
    /// Record lengths (comma-separated).
    #[arg(long, value_delimiter = ',', default_value = "256,512,1024,2048")]
    pub lengths: Vec<usize>,
    /// Ideal squeezing levels in dB (comma-separated).
    #[arg(long, value_delimiter = ',', default_value = "4,6,8")]
    pub sq_db: Vec<f64>,
    /// States per squeezing level.
    #[arg(long, default_value_t = 20)]
    pub states: usize,
    #[arg(long, default_value_t = 0.1)]
    pub loss: f64,
    #[arg(long, default_value_t = 0.05)]
    pub phase_noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub nbar: f64,
    /// Largest trace the truth state may lose to truncation.
    #[arg(long, default_value_t = 0.1)]
    pub max_tail: f64,
    #[arg(long, default_value_t = 2000)]
    pub mle_max_iters: usize,
    /// Report stem: writes <out>.csv and <out>.json.
    #[arg(long, default_value = "compare")]
    pub out: PathBuf,
}
