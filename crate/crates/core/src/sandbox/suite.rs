//! Seeded Gaussian-mixture benchmark: one random mixture and initial
//! latent per seed, each run compared against its own oracle trajectory.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::denoiser::{standard_normal, DenoiserSpec, GaussianMixture};
use super::sampler::{rmse_vs_oracle, run_sampler, SolverConfig, TrajectoryRecord};

/// Initial latents use a stream decorrelated from the mixture draw.
const LATENT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSuite {
    pub dim: usize,
    pub components: usize,
    pub seeds: Vec<u64>,
    pub mean_scale: f64,
    pub var_range: (f64, f64),
}

impl Default for MixtureSuite {
    fn default() -> Self {
        Self {
            dim: 8,
            components: 3,
            seeds: (0..5).collect(),
            mean_scale: 2.0,
            var_range: (0.05, 0.3),
        }
    }
}

/// One seed's denoiser and starting point.
#[derive(Debug, Clone)]
pub struct SuiteInstance {
    pub seed: u64,
    pub spec: DenoiserSpec,
    pub x0: Vec<f64>,
}

impl MixtureSuite {
    pub fn instance(&self, seed: u64) -> Result<SuiteInstance> {
        let mixture = GaussianMixture::random(self.dim, self.components, seed, self.mean_scale, self.var_range)?;
        Ok(SuiteInstance {
            seed,
            spec: DenoiserSpec::mixture(mixture, seed),
            x0: initial_latent(self.dim, seed),
        })
    }

    pub fn instances(&self) -> Result<Vec<SuiteInstance>> {
        self.seeds.iter().map(|&s| self.instance(s)).collect()
    }

    /// Runs `cfg` and the oracle on every seed, in parallel across seeds.
    /// Results come back in seed order.
    pub fn run(&self, cfg: &SolverConfig) -> Result<Vec<SeedRun>> {
        let instances = self.instances()?;
        instances
            .par_iter()
            .map(|inst| SeedRun::new(inst, cfg))
            .collect()
    }
}

pub fn initial_latent(dim: usize, seed: u64) -> Vec<f64> {
    standard_normal(dim, seed ^ LATENT_STREAM)
}

/// A forecasting run paired with its oracle.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub record: TrajectoryRecord,
    pub oracle: TrajectoryRecord,
}

impl SeedRun {
    pub fn new(inst: &SuiteInstance, cfg: &SolverConfig) -> Result<Self> {
        let record = run_sampler(&inst.spec, cfg, &inst.x0)?;
        let oracle = run_sampler(&inst.spec, &SolverConfig::oracle(cfg.n_steps())?, &inst.x0)?;
        Ok(Self {
            seed: inst.seed,
            record,
            oracle,
        })
    }

    pub fn checkpoint_rmse(&self, checkpoints: &[usize]) -> Result<Vec<f64>> {
        rmse_vs_oracle(&self.record, &self.oracle, checkpoints)
    }

    pub fn final_rmse(&self) -> Result<f64> {
        Ok(self.checkpoint_rmse(&[self.record.n_steps()])?[0])
    }
}
