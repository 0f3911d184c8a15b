//! Command-line surface: global flags, subcommands, and their arguments.
//!
//! Flag values override the config file, which overrides built-in defaults;
//! the global seed additionally falls back to the `ECGQ_SEED` environment
//! variable before the default of 0.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ecgq::diffusion::{Sampler, Space};
use ecgq::quality::MetricKind;

/// ECG noise quantification: scalograms, diffusion reconstruction, and
/// divergence reports.
#[derive(Parser)]
#[command(name = "ecgq", version, about, max_term_width = 100)]
pub struct Cli {
    /// JSON run configuration (flags override its fields)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Global seed (overrides the config file and the ECGQ_SEED variable)
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Cap worker threads (results do not depend on this)
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Synthesize a labeled corpus of clean and corrupted ECG records
    Synth(SynthArgs),
    /// Convert one external recording into the raw corpus format
    Ingest(IngestArgs),
    /// Render the time-frequency grids of one recording to CSV
    Aslt(AsltArgs),
    /// Train the autoencoder or a denoiser on a clean corpus
    Train(TrainArgs),
    /// Score every segment of a corpus under one configuration
    Score(ScoreArgs),
    /// Rank reconstruction configurations by class separation
    Sweep(SweepArgs),
    /// Intersect two score tables into a refined training set
    Refine(RefineArgs),
    /// Track reconstruction quality over a long recording
    Monitor(MonitorArgs),
}

/// Input container format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    /// Two-column time,voltage CSV (needs --fs)
    Csv,
    /// Raw little-endian f32 samples with a JSON sidecar
    Raw,
}

/// Trainable model kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Autoencoder,
    Pixel,
    Latent,
}

/// Reconstruction space flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Pixel,
    Latent,
}

impl From<SpaceArg> for Space {
    fn from(v: SpaceArg) -> Space {
        match v {
            SpaceArg::Pixel => Space::Pixel,
            SpaceArg::Latent => Space::Latent,
        }
    }
}

/// Sampler flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Ddpm,
    Ddim,
}

impl From<SamplerArg> for Sampler {
    fn from(v: SamplerArg) -> Sampler {
        match v {
            SamplerArg::Ddpm => Sampler::Ddpm,
            SamplerArg::Ddim => Sampler::Ddim,
        }
    }
}

/// Ranking metric flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Psnr,
    Mae,
    Ssim,
}

impl From<MetricArg> for MetricKind {
    fn from(v: MetricArg) -> MetricKind {
        match v {
            MetricArg::Psnr => MetricKind::Psnr,
            MetricArg::Mae => MetricKind::Mae,
            MetricArg::Ssim => MetricKind::Ssim,
        }
    }
}

#[derive(Args)]
pub struct SynthArgs {
    /// Number of records to synthesize
    #[arg(long)]
    pub count: usize,

    /// Output corpus directory
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// Sampling rate (Hz)
    #[arg(long, default_value_t = 128.0)]
    pub fs: f64,

    /// Record duration (seconds)
    #[arg(long, default_value_t = 10.0)]
    pub dur_s: f64,

    /// Lower heart-rate bound (bpm)
    #[arg(long, default_value_t = 55.0)]
    pub hr_min: f64,

    /// Upper heart-rate bound (bpm)
    #[arg(long, default_value_t = 95.0)]
    pub hr_max: f64,

    /// Fraction of records given a transient burst
    #[arg(long, default_value_t = 0.0)]
    pub burst_frac: f64,

    /// Fraction of records given record-wide static noise
    #[arg(long, default_value_t = 0.0)]
    pub static_frac: f64,

    /// Fraction of records given baseline drift
    #[arg(long, default_value_t = 0.0)]
    pub drift_frac: f64,

    /// Noise level of corrupted records (dB)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub snr_db: f64,
}

#[derive(Args)]
pub struct IngestArgs {
    /// Input recording (.csv or .f32le)
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,

    /// Input format (inferred from the extension when omitted)
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,

    /// Sampling rate of CSV input (Hz)
    #[arg(long)]
    pub fs: Option<f64>,

    /// Resample to this rate after reading (Hz)
    #[arg(long, value_name = "HZ")]
    pub resample: Option<f64>,

    /// Output corpus directory
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// Record name (defaults to the input file stem)
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args)]
pub struct AsltArgs {
    /// Input recording (.csv or .f32le)
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,

    /// Input format (inferred from the extension when omitted)
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,

    /// Sampling rate of CSV input (Hz)
    #[arg(long)]
    pub fs: Option<f64>,

    /// Output directory for the grid CSVs
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// Segment length (seconds)
    #[arg(long, default_value_t = 10.0)]
    pub window_s: f64,

    /// Lower band edge (Hz)
    #[arg(long)]
    pub f_min: Option<f64>,

    /// Upper band edge (Hz)
    #[arg(long)]
    pub f_max: Option<f64>,

    /// Analysis frequency count before resizing
    #[arg(long)]
    pub n_freq_bins: Option<usize>,

    /// Superlet order count at the lower band edge
    #[arg(long)]
    pub o_min: Option<usize>,

    /// Superlet order count at the upper band edge
    #[arg(long)]
    pub o_max: Option<usize>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Which model to train
    #[arg(long, value_enum)]
    pub kind: KindArg,

    /// Clean training corpus directory
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,

    /// Checkpoint output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Autoencoder checkpoint (required by --kind latent)
    #[arg(long, value_name = "FILE")]
    pub autoencoder: Option<PathBuf>,

    /// Training epochs
    #[arg(long, default_value_t = 4)]
    pub epochs: usize,

    /// Minibatch size
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,

    /// Learning rate
    #[arg(long, default_value_t = 2e-3)]
    pub lr: f64,

    /// Segment length (seconds)
    #[arg(long, default_value_t = 10.0)]
    pub window_s: f64,
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Corpus directory to score
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,

    /// Directory holding trained checkpoints
    #[arg(long, value_name = "DIR")]
    pub checkpoints: Option<PathBuf>,

    /// Report output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Reconstruction space
    #[arg(long, value_enum)]
    pub space: Option<SpaceArg>,

    /// Reverse-chain sampler
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerArg>,

    /// Diffusion depth (0 scores the identity reconstruction)
    #[arg(long)]
    pub lambda: Option<usize>,

    /// Deterministic-sampler step width
    #[arg(long)]
    pub stride: Option<usize>,

    /// Segment length (seconds)
    #[arg(long, default_value_t = 10.0)]
    pub window_s: f64,
}

#[derive(Args)]
pub struct SweepArgs {
    /// Corpus directory with clean and noise-labeled records
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,

    /// Directory holding trained checkpoints
    #[arg(long, value_name = "DIR")]
    pub checkpoints: Option<PathBuf>,

    /// Report output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Spaces to sweep, comma-separated (default pixel,latent)
    #[arg(long, value_name = "LIST")]
    pub spaces: Option<String>,

    /// Samplers to sweep, comma-separated (default ddpm,ddim)
    #[arg(long, value_name = "LIST")]
    pub samplers: Option<String>,

    /// Depths to sweep, comma-separated (default 10,30,50)
    #[arg(long, value_name = "LIST")]
    pub lambdas: Option<String>,

    /// Metrics to report, comma-separated (default psnr,mae,ssim)
    #[arg(long, value_name = "LIST")]
    pub metrics: Option<String>,

    /// Deterministic-sampler step width
    #[arg(long, default_value_t = 10)]
    pub stride: usize,

    /// Segment length (seconds)
    #[arg(long, default_value_t = 10.0)]
    pub window_s: f64,

    /// Also render W₁ heatmaps as SVG
    #[arg(long)]
    pub svg: bool,
}

#[derive(Args)]
pub struct RefineArgs {
    /// Score table of the first configuration
    #[arg(long, value_name = "CSV")]
    pub scores_a: PathBuf,

    /// Score table of the second configuration
    #[arg(long, value_name = "CSV")]
    pub scores_b: PathBuf,

    /// Percentage of top-ranked ids each table keeps
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=100))]
    pub n_percent: u32,

    /// Ranking metric
    #[arg(long, value_enum, default_value = "psnr")]
    pub metric: MetricArg,

    /// Also write the refinement plan as JSON
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct MonitorArgs {
    /// Long recording to monitor (.csv or .f32le)
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,

    /// Input format (inferred from the extension when omitted)
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,

    /// Sampling rate of CSV input (Hz)
    #[arg(long)]
    pub fs: Option<f64>,

    /// Directory holding trained checkpoints
    #[arg(long, value_name = "DIR")]
    pub checkpoints: Option<PathBuf>,

    /// Report output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Reconstruction space
    #[arg(long, value_enum)]
    pub space: Option<SpaceArg>,

    /// Reverse-chain sampler
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerArg>,

    /// Diffusion depth
    #[arg(long)]
    pub lambda: Option<usize>,

    /// Deterministic-sampler step width
    #[arg(long)]
    pub stride: Option<usize>,

    /// Segment length (seconds)
    #[arg(long, default_value_t = 10.0)]
    pub window_s: f64,

    /// Degradation threshold (dB); see also --calibrate
    #[arg(long, allow_negative_numbers = true)]
    pub threshold_db: Option<f64>,

    /// Calibrate the threshold from a clean score table instead
    #[arg(long, value_name = "CSV", conflicts_with = "threshold_db")]
    pub calibrate: Option<PathBuf>,

    /// Consecutive degraded segments that raise one event
    #[arg(long, default_value_t = ecgq::quality::DEFAULT_CONSECUTIVE_K)]
    pub consecutive: usize,

    /// Also render the PSNR series as SVG
    #[arg(long)]
    pub svg: bool,
}
