//! On-disk experiment configuration (JSON, unknown keys rejected).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{SweepBase, SweepPoint};
use crate::error::{Error, Result};
use crate::forecast::{CachePolicy, ForecasterConfig};
use crate::sandbox::{
    initial_latent, BlockStack, CachingMode, Channel, DenoiserSpec, GaussianMixture, MixtureComponent, MixtureSuite,
    SolverConfig,
};
use crate::schedule::{adaptive_schedule, ActivationSchedule, ScheduleParams};

fn default_dim() -> usize {
    MixtureSuite::default().dim
}
fn default_components() -> usize {
    MixtureSuite::default().components
}
fn default_mean_scale() -> f64 {
    MixtureSuite::default().mean_scale
}
fn default_var_range() -> (f64, f64) {
    MixtureSuite::default().var_range
}
fn default_blocks() -> usize {
    4
}
fn default_gain() -> f64 {
    0.5
}
fn default_gate_amp() -> f64 {
    0.5
}

/// Denoiser family. Mixture-based kinds draw a fresh random mixture per
/// seed unless `mixture` lists the components explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DenoiserConfig {
    GaussianMixtureFlow {
        #[serde(default)]
        mixture: Option<Vec<MixtureComponent>>,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_components")]
        components: usize,
        #[serde(default = "default_mean_scale")]
        mean_scale: f64,
        #[serde(default = "default_var_range")]
        var_range: (f64, f64),
    },
    FunctionFamily {
        channels: Vec<Channel>,
    },
    BlockStack {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_components")]
        components: usize,
        #[serde(default = "default_mean_scale")]
        mean_scale: f64,
        #[serde(default = "default_var_range")]
        var_range: (f64, f64),
        #[serde(default = "default_blocks")]
        blocks: usize,
        #[serde(default = "default_gain")]
        gain: f64,
        #[serde(default = "default_gate_amp")]
        gate_amp: f64,
    },
}

impl DenoiserConfig {
    pub fn build(&self, seed: u64) -> Result<DenoiserSpec> {
        Ok(match self {
            DenoiserConfig::GaussianMixtureFlow {
                mixture,
                dim,
                components,
                mean_scale,
                var_range,
            } => {
                let m = match mixture {
                    Some(comps) => GaussianMixture::new(comps.clone())?,
                    None => GaussianMixture::random(*dim, *components, seed, *mean_scale, *var_range)?,
                };
                DenoiserSpec::mixture(m, seed)
            }
            DenoiserConfig::FunctionFamily { channels } => DenoiserSpec::function_family(channels.clone(), seed)?,
            DenoiserConfig::BlockStack {
                dim,
                components,
                mean_scale,
                var_range,
                blocks,
                gain,
                gate_amp,
            } => {
                let base = GaussianMixture::random(*dim, *components, seed, *mean_scale, *var_range)?;
                DenoiserSpec::block_stack(BlockStack::random(base, *blocks, *gain, *gate_amp, seed)?, seed)
            }
        })
    }
}

/// Full-pass schedule for one run; `n_steps` comes from the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    AllFull,
    Adaptive {
        interval: usize,
        warmup: usize,
        #[serde(default)]
        alpha: f64,
    },
}

impl ScheduleConfig {
    pub fn build(&self, n_steps: usize) -> Result<ActivationSchedule> {
        match *self {
            ScheduleConfig::AllFull => ActivationSchedule::all_full(n_steps),
            ScheduleConfig::Adaptive {
                interval,
                warmup,
                alpha,
            } => adaptive_schedule(&ScheduleParams {
                n_steps,
                interval,
                warmup,
                alpha,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub label: String,
    pub schedule: ScheduleConfig,
    /// Absent means the oracle: every step is a full pass.
    #[serde(default)]
    pub forecaster: Option<ForecasterConfig>,
    #[serde(default)]
    pub caching: CachingMode,
}

fn default_n_steps() -> usize {
    50
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub denoiser: DenoiserConfig,
    #[serde(default = "default_n_steps")]
    pub n_steps: usize,
    pub runs: Vec<RunConfig>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub cache_policy: CachePolicy,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub checkpoints: Vec<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidParam(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParam(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::InvalidParam(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::InvalidParam("n_steps must be positive".into()));
        }
        if self.runs.is_empty() {
            return Err(Error::InvalidParam("runs must not be empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParam("seeds must not be empty".into()));
        }
        let mut labels: Vec<&str> = self.runs.iter().map(|r| r.label.as_str()).collect();
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidParam(format!("duplicate run label {:?}", w[0])));
        }
        if let Some(bad) = self
            .runs
            .iter()
            .find(|r| r.label.is_empty() || !r.label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'))
        {
            return Err(Error::InvalidParam(format!(
                "run label {:?} must be non-empty ASCII letters, digits, '_' or '-'",
                bad.label
            )));
        }
        if let Some(&c) = self.checkpoints.iter().find(|&&c| c == 0 || c > self.n_steps) {
            return Err(Error::InvalidParam(format!("checkpoint {c} outside 1..={}", self.n_steps)));
        }
        for r in &self.runs {
            r.schedule.build(self.n_steps)?;
            if let Some(f) = &r.forecaster {
                f.build(self.cache_policy)?;
            }
        }
        Ok(())
    }

    pub fn solver(&self, run: &RunConfig) -> Result<SolverConfig> {
        let schedule = run.schedule.build(self.n_steps)?;
        Ok(SolverConfig {
            schedule,
            forecaster: run.forecaster,
            cache_policy: self.cache_policy,
            caching: run.caching,
        })
    }

    /// Denoiser and initial latent for one seed.
    pub fn instance(&self, seed: u64) -> Result<(DenoiserSpec, Vec<f64>)> {
        let spec = self.denoiser.build(seed)?;
        let x0 = initial_latent(spec.latent_dim(), seed);
        Ok((spec, x0))
    }
}

/// Sweep settings; everything is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub base: SweepBase,
    /// Defaults to the axis' standard points.
    #[serde(default)]
    pub points: Option<Vec<SweepPoint>>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParam(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidParam(format!("{}: {e}", path.display())))
    }
}
