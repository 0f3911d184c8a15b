//! Run configuration: a JSON file whose values sit between command-line
//! flags and built-in defaults.
//!
//! Precedence, highest first: explicit flags, then the `--config` file, then
//! the `ECGQ_SEED` environment variable (seed only), then built-in defaults.
//! The file round-trips losslessly through serde so a saved configuration
//! reproduces the run that wrote it.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use ecgq::aslt::AsltConfig;
use ecgq::diffusion::{build_schedule, NoiseSchedule, ReconstructionConfig};
use ecgq::quality::SweepGrid;

/// The config file schema this build reads and writes.
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Diffusion schedule parameters in file form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    /// Total step count T.
    pub t_max: usize,
    /// β at the first step.
    pub beta_start: f64,
    /// β at the last step.
    pub beta_end: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        ScheduleParams { t_max: 1000, beta_start: 1e-4, beta_end: 0.02 }
    }
}

impl ScheduleParams {
    pub fn build(&self) -> ecgq::Result<NoiseSchedule> {
        build_schedule(self.t_max, self.beta_start, self.beta_end)
    }
}

/// Optional defaults shared by all subcommands; every field may be omitted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must equal [`CONFIG_SCHEMA_VERSION`].
    pub schema_version: u32,
    /// Default directory of input records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    /// Default directory holding model checkpoints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_dir: Option<PathBuf>,
    /// Default directory receiving reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_dir: Option<PathBuf>,
    /// Scalogram band and resolution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aslt: Option<AsltConfig>,
    /// Diffusion schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleParams>,
    /// Default reconstruction configuration for score/monitor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<ReconstructionConfig>,
    /// Default sweep grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepGrid>,
    /// Base seed when no `--seed` flag is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RunConfig {
    /// Parse and validate a config file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config file {}", path.display()))?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            bail!(
                "config file {} declares schema_version {}, this build reads {}",
                path.display(),
                cfg.schema_version,
                CONFIG_SCHEMA_VERSION
            );
        }
        // Directories are validated (or created) by the command that uses
        // them: one config file may describe a pipeline whose early steps
        // create the directories its later steps read.
        Ok(cfg)
    }
}

/// Everything global a command resolves before running.
#[derive(Debug, Default)]
pub struct Resolved {
    pub config: Option<RunConfig>,
    pub seed: u64,
}

impl Resolved {
    /// Apply the documented precedence to the global flags.
    pub fn new(config_path: Option<&Path>, seed_flag: Option<u64>) -> Result<Resolved> {
        let config = config_path.map(RunConfig::load).transpose()?;
        let seed = match seed_flag.or_else(|| config.as_ref().and_then(|c| c.seed)) {
            Some(s) => s,
            None => match std::env::var("ECGQ_SEED") {
                Ok(raw) => raw
                    .parse::<u64>()
                    .with_context(|| format!("ECGQ_SEED must be an unsigned integer, got '{raw}'"))?,
                Err(_) => 0,
            },
        };
        Ok(Resolved { config, seed })
    }

    fn cfg(&self) -> Option<&RunConfig> {
        self.config.as_ref()
    }

    pub fn aslt(&self) -> AsltConfig {
        self.cfg().and_then(|c| c.aslt.clone()).unwrap_or_default()
    }

    pub fn schedule_params(&self) -> ScheduleParams {
        self.cfg().and_then(|c| c.schedule).unwrap_or_default()
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        Ok(self.schedule_params().build()?)
    }

    /// Reconstruction settings: per-field flag overrides on the file values.
    pub fn reconstruction(
        &self,
        space: Option<ecgq::diffusion::Space>,
        sampler: Option<ecgq::diffusion::Sampler>,
        lambda: Option<usize>,
        stride: Option<usize>,
    ) -> ReconstructionConfig {
        let base = self
            .cfg()
            .and_then(|c| c.reconstruction.clone())
            .unwrap_or(ReconstructionConfig {
                space: ecgq::diffusion::Space::Latent,
                sampler: ecgq::diffusion::Sampler::Ddim,
                lambda: 30,
                ddim_stride: 10,
                seed: 0,
            });
        ReconstructionConfig {
            space: space.unwrap_or(base.space),
            sampler: sampler.unwrap_or(base.sampler),
            lambda: lambda.unwrap_or(base.lambda),
            ddim_stride: stride.unwrap_or(base.ddim_stride),
            seed: self.seed,
        }
    }

    /// A directory argument: flag, then config field, then an error naming both.
    pub fn dir(&self, flag: Option<PathBuf>, field: &str, flag_name: &str) -> Result<PathBuf> {
        let from_cfg = |c: &RunConfig| match field {
            "data_dir" => c.data_dir.clone(),
            "checkpoint_dir" => c.checkpoint_dir.clone(),
            "report_dir" => c.report_dir.clone(),
            _ => None,
        };
        flag.or_else(|| self.cfg().and_then(from_cfg)).ok_or_else(|| {
            crate::usage(format!("{flag_name} is required (or set {field} in the config file)"))
        })
    }
}
