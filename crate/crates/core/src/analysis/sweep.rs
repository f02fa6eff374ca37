//! Ablation sweeps over the Spectrum settings on the mixture benchmark.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{ForecasterConfig, SpectrumConfig};
use crate::sandbox::{MixtureSuite, SolverConfig};
use crate::schedule::{adaptive_schedule, nfe, ScheduleParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Lambda,
    Degree,
    Alpha,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(Self::Lambda),
            "degree" => Ok(Self::Degree),
            "alpha" => Ok(Self::Alpha),
            other => Err(Error::InvalidParam(format!(
                "unknown sweep axis {other:?}, expected lambda, degree or alpha"
            ))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Lambda => "lambda",
            Self::Degree => "degree",
            Self::Alpha => "alpha",
        })
    }
}

/// One value on the swept axis. For the alpha axis `interval` picks the
/// schedule spacing so that runs can be compared at matched NFE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    pub value: f64,
    #[serde(default)]
    pub interval: Option<usize>,
}

impl SweepPoint {
    pub fn value(value: f64) -> Self {
        Self { value, interval: None }
    }
}

impl SweepAxis {
    pub fn default_points(self) -> Vec<SweepPoint> {
        match self {
            Self::Lambda => [1e-3, 0.1, 10.0].map(SweepPoint::value).to_vec(),
            Self::Degree => [2.0, 4.0, 6.0].map(SweepPoint::value).to_vec(),
            Self::Alpha => vec![
                SweepPoint {
                    value: 0.0,
                    interval: Some(8),
                },
                SweepPoint {
                    value: 3.0,
                    interval: Some(2),
                },
            ],
        }
    }
}

/// Settings held fixed while one axis varies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBase {
    #[serde(default)]
    pub suite: MixtureSuite,
    #[serde(default)]
    pub schedule: ScheduleParams,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
}

impl Default for SweepBase {
    fn default() -> Self {
        Self {
            suite: MixtureSuite::default(),
            schedule: ScheduleParams::default(),
            spectrum: SpectrumConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub interval: usize,
    pub mean_rmse: f64,
    /// Final RMSE per seed, in suite order.
    pub seed_rmse: Vec<f64>,
    pub nfe: usize,
    pub wall_seconds: f64,
}

fn point_config(axis: SweepAxis, point: &SweepPoint, base: &SweepBase) -> Result<(ScheduleParams, SpectrumConfig)> {
    let mut sched = base.schedule;
    let mut spectrum = base.spectrum;
    match axis {
        SweepAxis::Lambda => spectrum.lambda = point.value,
        SweepAxis::Degree => {
            if !(point.value >= 0.0 && point.value.fract() == 0.0) {
                return Err(Error::InvalidParam(format!("degree must be a whole number, got {}", point.value)));
            }
            spectrum.degree = point.value as usize;
        }
        SweepAxis::Alpha => sched.alpha = point.value,
    }
    if let Some(interval) = point.interval {
        sched.interval = interval;
    }
    Ok((sched, spectrum))
}

/// Runs the Spectrum forecaster on the suite at every point and reports
/// the final-step RMSE against the oracle.
pub fn sweep_report(axis: SweepAxis, points: &[SweepPoint], base: &SweepBase) -> Result<Vec<SweepRow>> {
    points
        .iter()
        .map(|point| {
            let started = Instant::now();
            let (sched_params, spectrum) = point_config(axis, point, base)?;
            let schedule = adaptive_schedule(&sched_params)?;
            let cfg = SolverConfig::new(
                schedule.clone(),
                ForecasterConfig::Spectrum {
                    degree: spectrum.degree,
                    lambda: spectrum.lambda,
                },
            );
            let runs = base.suite.run(&cfg)?;
            let seed_rmse = runs.iter().map(|r| r.final_rmse()).collect::<Result<Vec<_>>>()?;
            let mean_rmse = seed_rmse.iter().sum::<f64>() / seed_rmse.len().max(1) as f64;
            Ok(SweepRow {
                axis_value: point.value,
                interval: sched_params.interval,
                mean_rmse,
                seed_rmse,
                nfe: nfe(&schedule),
                wall_seconds: started.elapsed().as_secs_f64(),
            })
        })
        .collect()
}
