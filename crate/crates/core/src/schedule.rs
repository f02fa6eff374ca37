//! Activation schedules: which of the `N` steps run the full denoiser.
//!
//! Indices are 1-based. After a warm-up prefix `1..=W`, full passes land at
//! `W + floor((r+1)·interval + alpha·r(r+1)/2)` for `r = 0, 1, 2, ...`;
//! `alpha = 0` gives the fixed-interval schedule.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleParams {
    pub n_steps: usize,
    pub interval: usize,
    pub warmup: usize,
    #[serde(default)]
    pub alpha: f64,
}

impl ScheduleParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::InvalidParam("n_steps must be positive".into()));
        }
        if self.interval == 0 {
            return Err(Error::InvalidParam("interval must be positive".into()));
        }
        if self.warmup == 0 || self.warmup > self.n_steps {
            return Err(Error::InvalidParam(format!(
                "warmup must lie in 1..={}, got {}",
                self.n_steps, self.warmup
            )));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidParam(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        Ok(())
    }

    /// Time spacing `1/N`.
    pub fn dt(&self) -> f64 {
        1.0 / self.n_steps as f64
    }
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            n_steps: 50,
            interval: 2,
            warmup: 5,
            alpha: 3.0,
        }
    }
}

/// Partition of `1..=N` into full-pass and forecast steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationSchedule {
    n_steps: usize,
    full: BTreeSet<usize>,
}

impl ActivationSchedule {
    /// Every step is a full pass.
    pub fn all_full(n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidParam("n_steps must be positive".into()));
        }
        Ok(Self {
            n_steps,
            full: (1..=n_steps).collect(),
        })
    }

    pub fn from_full_indices(n_steps: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let full: BTreeSet<usize> = indices.into_iter().collect();
        if n_steps == 0 {
            return Err(Error::InvalidParam("n_steps must be positive".into()));
        }
        if !full.contains(&1) {
            return Err(Error::InvalidParam("step 1 must be a full pass".into()));
        }
        if let Some(&bad) = full.iter().find(|&&j| j == 0 || j > n_steps) {
            return Err(Error::InvalidParam(format!("full-pass index {bad} outside 1..={n_steps}")));
        }
        Ok(Self { n_steps, full })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn is_full_pass(&self, step: usize) -> bool {
        self.full.contains(&step)
    }

    pub fn full_pass_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.full.iter().copied()
    }

    pub fn forecast_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.n_steps).filter(|j| !self.full.contains(j))
    }
}

/// Comma-separated full-pass indices, e.g. `1,2,3,4,5,7,12`.
impl fmt::Display for ActivationSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for j in &self.full {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{j}")?;
            first = false;
        }
        Ok(())
    }
}

pub fn adaptive_schedule(params: &ScheduleParams) -> Result<ActivationSchedule> {
    params.validate()?;
    let n = params.n_steps;
    let mut full: BTreeSet<usize> = (1..=params.warmup).collect();
    let interval = params.interval as f64;
    for r in 0usize.. {
        let r_f = r as f64;
        let offset = ((r_f + 1.0) * interval + params.alpha * r_f * (r_f + 1.0) / 2.0).floor();
        let j = params.warmup as f64 + offset;
        if j > n as f64 {
            break;
        }
        full.insert(j as usize);
    }
    Ok(ActivationSchedule { n_steps: n, full })
}

pub fn uniform_schedule(n_steps: usize, interval: usize, warmup: usize) -> Result<ActivationSchedule> {
    adaptive_schedule(&ScheduleParams {
        n_steps,
        interval,
        warmup,
        alpha: 0.0,
    })
}

/// Number of full denoiser passes.
pub fn nfe(schedule: &ActivationSchedule) -> usize {
    schedule.full.len()
}

/// `N / NFE`.
pub fn speedup_ratio(schedule: &ActivationSchedule) -> f64 {
    schedule.n_steps as f64 / nfe(schedule) as f64
}
