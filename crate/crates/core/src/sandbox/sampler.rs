//! Euler sampler with step skipping: full denoiser passes on scheduled
//! steps, forecasts everywhere else.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::forecast::{CachePolicy, Forecaster, ForecasterConfig};
use crate::schedule::ActivationSchedule;

use super::denoiser::{analytic_denoiser, DenoiserKind, DenoiserSpec};

/// What gets cached for a block stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CachingMode {
    /// Only the network output.
    #[default]
    LastBlock,
    /// One cache and forecaster per block.
    PerBlock,
}

impl CachingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CachingMode::LastBlock => "last_block",
            CachingMode::PerBlock => "per_block",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub schedule: ActivationSchedule,
    /// `None` runs every step through the denoiser (the oracle).
    pub forecaster: Option<ForecasterConfig>,
    pub cache_policy: CachePolicy,
    pub caching: CachingMode,
}

impl SolverConfig {
    pub fn oracle(n_steps: usize) -> Result<Self> {
        Ok(Self {
            schedule: ActivationSchedule::all_full(n_steps)?,
            forecaster: None,
            cache_policy: CachePolicy::All,
            caching: CachingMode::LastBlock,
        })
    }

    pub fn new(schedule: ActivationSchedule, forecaster: ForecasterConfig) -> Self {
        Self {
            schedule,
            forecaster: Some(forecaster),
            cache_policy: CachePolicy::All,
            caching: CachingMode::LastBlock,
        }
    }

    pub fn n_steps(&self) -> usize {
        self.schedule.n_steps()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepFlag {
    Actual,
    Forecast,
}

impl StepFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            StepFlag::Actual => "actual",
            StepFlag::Forecast => "forecast",
        }
    }
}

/// Everything a run produced. Equality ignores `wall_time` and compares
/// floats bit for bit.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    /// `states[j-1]` is the latent after step `j`.
    pub states: Vec<Vec<f64>>,
    /// `features[j-1]` is the feature used at step `j`.
    pub features: Vec<Vec<f64>>,
    pub flags: Vec<StepFlag>,
    /// Time at which step `j` evaluates its drift, `(j-1)/N`.
    pub times: Vec<f64>,
    pub nfe: usize,
    pub fit_count: usize,
    pub wall_time: f64,
}

impl TrajectoryRecord {
    pub fn n_steps(&self) -> usize {
        self.states.len()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }
}

fn bits_eq(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()))
}

impl PartialEq for TrajectoryRecord {
    fn eq(&self, other: &Self) -> bool {
        bits_eq(&self.states, &other.states)
            && bits_eq(&self.features, &other.features)
            && self.flags == other.flags
            && self.times.iter().map(|t| t.to_bits()).eq(other.times.iter().map(|t| t.to_bits()))
            && self.nfe == other.nfe
            && self.fit_count == other.fit_count
    }
}

/// Rectified-flow Euler step `x + (t_to - t_from) · eps`.
pub fn euler_step(x: &[f64], eps: &[f64], t_from: f64, t_to: f64) -> Result<Vec<f64>> {
    if !(t_to > t_from) || !(0.0..=1.0).contains(&t_from) || !(0.0..=1.0).contains(&t_to) {
        return Err(Error::InvalidParam(format!(
            "Euler step needs 0 <= t_from < t_to <= 1, got {t_from} -> {t_to}"
        )));
    }
    if x.len() != eps.len() {
        return Err(Error::Shape(format!("latent has length {}, drift has {}", x.len(), eps.len())));
    }
    let dt = t_to - t_from;
    Ok(x.iter().zip(eps).map(|(xi, ei)| xi + dt * ei).collect())
}

/// Forecasting backend: one forecaster on the output, or one per block.
enum Backend {
    Oracle,
    Last(Box<dyn Forecaster>),
    PerBlock(Vec<Box<dyn Forecaster>>),
}

/// Runs the skip-and-forecast loop for `j = 1..=N`.
///
/// Step `j` evaluates at `t = (j-1)/N`. Scheduled steps call the denoiser,
/// insert the feature into the cache and refit; other steps ask the
/// forecaster. Every step then advances with [`euler_step`] to `j/N`.
pub fn run_sampler(spec: &DenoiserSpec, cfg: &SolverConfig, x0: &[f64]) -> Result<TrajectoryRecord> {
    let d = spec.latent_dim();
    if x0.len() != d {
        return Err(Error::Shape(format!("initial latent has length {}, expected {d}", x0.len())));
    }
    let n = cfg.n_steps();
    let started = Instant::now();

    let block_stack = match (&spec.kind, cfg.caching) {
        (DenoiserKind::BlockStack(s), CachingMode::PerBlock) => Some(s),
        (_, CachingMode::PerBlock) => {
            return Err(Error::InvalidParam("per-block caching needs a block_stack denoiser".into()))
        }
        _ => None,
    };
    let mut backend = match (&cfg.forecaster, block_stack) {
        (None, _) => Backend::Oracle,
        (Some(fc), None) => Backend::Last(fc.build(cfg.cache_policy)?),
        (Some(fc), Some(stack)) => Backend::PerBlock(
            (0..stack.block_count())
                .map(|_| fc.build(cfg.cache_policy))
                .collect::<Result<_>>()?,
        ),
    };

    let mut x = x0.to_vec();
    let mut rec = TrajectoryRecord {
        states: Vec::with_capacity(n),
        features: Vec::with_capacity(n),
        flags: Vec::with_capacity(n),
        times: Vec::with_capacity(n),
        nfe: 0,
        fit_count: 0,
        wall_time: 0.0,
    };
    let dt = 1.0 / n as f64;

    for j in 1..=n {
        let t = (j - 1) as f64 * dt;
        let t_next = if j == n { 1.0 } else { j as f64 * dt };
        let actual = matches!(backend, Backend::Oracle) || cfg.schedule.is_full_pass(j);
        let feature = if actual {
            rec.nfe += 1;
            match &mut backend {
                Backend::Oracle => analytic_denoiser(&x, t, spec)?.feature,
                Backend::Last(f) => {
                    let out = analytic_denoiser(&x, t, spec)?;
                    f.observe(t, out.feature.clone()).map_err(|e| e.at_step(j))?;
                    out.feature
                }
                Backend::PerBlock(fs) => {
                    let stack = block_stack.expect("per-block backend implies a block stack");
                    let parts = stack.forward_parts(&x, t);
                    let y = stack.compose(&parts, t)?;
                    for (f, part) in fs.iter_mut().zip(parts) {
                        f.observe(t, part).map_err(|e| e.at_step(j))?;
                    }
                    y
                }
            }
        } else {
            match &backend {
                Backend::Oracle => unreachable!("oracle runs never forecast"),
                Backend::Last(f) => f.forecast(t).map_err(|e| e.at_step(j))?,
                Backend::PerBlock(fs) => {
                    let stack = block_stack.expect("per-block backend implies a block stack");
                    let parts = fs
                        .iter()
                        .map(|f| f.forecast(t))
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| e.at_step(j))?;
                    stack.compose(&parts, t)?
                }
            }
        };
        // the score map on the last-block feature is the identity
        x = euler_step(&x, &feature, t, t_next)?;
        rec.states.push(x.clone());
        rec.features.push(feature);
        rec.flags.push(if actual { StepFlag::Actual } else { StepFlag::Forecast });
        rec.times.push(t);
    }

    rec.fit_count = match &backend {
        Backend::Oracle => 0,
        Backend::Last(f) => f.fit_count(),
        Backend::PerBlock(fs) => fs.iter().map(|f| f.fit_count()).sum(),
    };
    rec.wall_time = started.elapsed().as_secs_f64();
    Ok(rec)
}

/// Root-mean-square latent difference after each (1-based) checkpoint step.
pub fn rmse_vs_oracle(a: &TrajectoryRecord, oracle: &TrajectoryRecord, checkpoints: &[usize]) -> Result<Vec<f64>> {
    if a.n_steps() != oracle.n_steps() {
        return Err(Error::Shape(format!(
            "trajectories have {} and {} steps",
            a.n_steps(),
            oracle.n_steps()
        )));
    }
    checkpoints
        .iter()
        .map(|&c| {
            if c == 0 || c > a.n_steps() {
                return Err(Error::InvalidParam(format!("checkpoint {c} outside 1..={}", a.n_steps())));
            }
            let (s, o) = (&a.states[c - 1], &oracle.states[c - 1]);
            if s.len() != o.len() {
                return Err(Error::Shape(format!("latent lengths {} and {} differ", s.len(), o.len())));
            }
            let mse = s.iter().zip(o).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / s.len() as f64;
            Ok(mse.sqrt())
        })
        .collect()
}
