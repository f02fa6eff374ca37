//! Command implementations behind the `spectral` binary.
//!
//! Every command writes its files once, after all runs finish. Timings go
//! to `*.timing.log` sidecars so the CSV and JSON outputs are byte-identical
//! across reruns.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    interpolation_error, sweep_report, verify_cheb_decay, verify_spectrum_bound, verify_taylor_attainment, Check,
    ChebDecayReport, KnownChannel, SpectrumBoundReport, SpectrumCheckConfig, SweepAxis, SweepPoint, SweepRow,
    TaylorAttainment,
};
use crate::config::{ExperimentConfig, SweepConfig};
use crate::forecast::SpectrumConfig;
use crate::sandbox::{rmse_vs_oracle, run_sampler, SolverConfig, TrajectoryRecord};
use crate::schedule::{adaptive_schedule, nfe, speedup_ratio, ScheduleParams};

/// Overrides the configured output directory when set.
pub const OUTPUT_DIR_ENV: &str = "SPECTRAL_OUTPUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Run(#[from] crate::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;

fn io_err(path: &Path, e: std::io::Error) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> HarnessResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Explicit override, then the environment, then the configured path.
pub fn resolve_output_dir(override_dir: Option<&Path>, configured: &Path) -> PathBuf {
    if let Some(d) = override_dir {
        return d.to_path_buf();
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => configured.to_path_buf(),
    }
}

/// Index line and `NFE=…, speedup=…` line.
pub fn cmd_schedule(params: &ScheduleParams) -> HarnessResult<String> {
    let s = adaptive_schedule(params).map_err(|e| HarnessError::Usage(e.to_string()))?;
    Ok(format!("{s}\nNFE={}, speedup={:?}\n", nfe(&s), speedup_ratio(&s)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_rmse: f64,
    pub checkpoint_rmse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub forecaster: String,
    pub nfe: usize,
    pub speedup: f64,
    pub fit_count: Vec<usize>,
    pub seeds: Vec<SeedSummary>,
    pub mean_final_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub denoiser: String,
    pub n_steps: usize,
    pub checkpoints: Vec<usize>,
    pub runs: Vec<RunSummary>,
}

impl SimulateSummary {
    pub fn run(&self, label: &str) -> Option<&RunSummary> {
        self.runs.iter().find(|r| r.label == label)
    }
}

struct SeedOutput {
    seed: u64,
    kind: &'static str,
    oracle: TrajectoryRecord,
    records: Vec<TrajectoryRecord>,
}

fn trajectory_csv(header: &str, rec: &TrajectoryRecord, oracle: &TrajectoryRecord) -> HarnessResult<String> {
    let steps: Vec<usize> = (1..=rec.n_steps()).collect();
    let rmse = rmse_vs_oracle(rec, oracle, &steps)?;
    let mut out = String::new();
    writeln!(out, "# {header}").unwrap();
    out.push_str("step,time,flag,rmse_to_oracle\n");
    for (i, r) in rmse.iter().enumerate() {
        writeln!(out, "{},{},{},{}", i + 1, rec.times[i], rec.flags[i].as_str(), r).unwrap();
    }
    Ok(out)
}

/// Runs every configured run on every seed against the oracle and writes
/// per-seed trajectory CSVs plus `summary.json`.
pub fn cmd_simulate(config_path: &Path, output_override: Option<&Path>) -> HarnessResult<SimulateSummary> {
    let cfg = ExperimentConfig::load(config_path).map_err(|e| HarnessError::Config(e.to_string()))?;
    let out_dir = resolve_output_dir(output_override, &cfg.output_dir);
    let solvers: Vec<SolverConfig> = cfg
        .runs
        .iter()
        .map(|r| cfg.solver(r))
        .collect::<crate::Result<_>>()
        .map_err(|e| HarnessError::Config(e.to_string()))?;

    let outputs: Vec<SeedOutput> = cfg
        .seeds
        .par_iter()
        .map(|&seed| -> HarnessResult<SeedOutput> {
            let (spec, x0) = cfg.instance(seed).map_err(|e| HarnessError::Config(e.to_string()))?;
            let oracle = run_sampler(&spec, &SolverConfig::oracle(cfg.n_steps)?, &x0)?;
            let records = solvers
                .iter()
                .zip(&cfg.runs)
                .map(|(s, r)| {
                    run_sampler(&spec, s, &x0)
                        .map_err(|e| HarnessError::Config(format!("run {:?}, seed {seed}: {e}", r.label)))
                })
                .collect::<HarnessResult<Vec<_>>>()?;
            Ok(SeedOutput {
                seed,
                kind: spec.kind_name(),
                oracle,
                records,
            })
        })
        .collect::<HarnessResult<_>>()?;

    let mut files: Vec<(String, String)> = Vec::new();
    let mut timing = String::from("run,seed,wall_seconds\n");
    let mut runs = Vec::with_capacity(cfg.runs.len());
    for (ri, (run, solver)) in cfg.runs.iter().zip(&solvers).enumerate() {
        let forecaster = run.forecaster.map_or_else(|| "none".to_string(), |f| f.label());
        let mut seeds = Vec::with_capacity(outputs.len());
        let mut fit_count = Vec::with_capacity(outputs.len());
        for o in &outputs {
            let rec = &o.records[ri];
            let header = format!(
                "denoiser={} seed={} run={} forecaster={} caching={} schedule={}",
                o.kind, o.seed, run.label, forecaster, run.caching.as_str(), solver.schedule
            );
            files.push((
                format!("{}_seed{}.csv", run.label, o.seed),
                trajectory_csv(&header, rec, &o.oracle)?,
            ));
            writeln!(timing, "{},{},{}", run.label, o.seed, rec.wall_time).unwrap();
            seeds.push(SeedSummary {
                seed: o.seed,
                final_rmse: rmse_vs_oracle(rec, &o.oracle, &[cfg.n_steps])?[0],
                checkpoint_rmse: rmse_vs_oracle(rec, &o.oracle, &cfg.checkpoints)?,
            });
            fit_count.push(rec.fit_count);
        }
        let mean_final_rmse = seeds.iter().map(|s| s.final_rmse).sum::<f64>() / seeds.len() as f64;
        runs.push(RunSummary {
            label: run.label.clone(),
            forecaster,
            nfe: nfe(&solver.schedule),
            speedup: speedup_ratio(&solver.schedule),
            fit_count,
            seeds,
            mean_final_rmse,
        });
    }
    let summary = SimulateSummary {
        denoiser: outputs.first().map_or("", |o| o.kind).to_string(),
        n_steps: cfg.n_steps,
        checkpoints: cfg.checkpoints.clone(),
        runs,
    };
    for (name, body) in &files {
        write_file(&out_dir, name, body)?;
    }
    write_file(&out_dir, "summary.json", &to_json(&summary))?;
    write_file(&out_dir, "simulate.timing.log", &timing)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundsSuite {
    Taylor,
    Chebyshev,
    Spectrum,
    All,
}

impl std::str::FromStr for BoundsSuite {
    type Err = HarnessError;

    fn from_str(s: &str) -> HarnessResult<Self> {
        match s {
            "taylor" => Ok(Self::Taylor),
            "chebyshev" => Ok(Self::Chebyshev),
            "spectrum" => Ok(Self::Spectrum),
            "all" => Ok(Self::All),
            other => Err(HarnessError::Usage(format!(
                "unknown suite {other:?}, expected taylor, chebyshev, spectrum or all"
            ))),
        }
    }
}

impl BoundsSuite {
    fn name(self) -> &'static str {
        match self {
            Self::Taylor => "taylor",
            Self::Chebyshev => "chebyshev",
            Self::Spectrum => "spectrum",
            Self::All => "all",
        }
    }

    fn includes(self, other: BoundsSuite) -> bool {
        self == Self::All || self == other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub taylor: Vec<TaylorAttainment>,
    pub decay: Vec<ChebDecayReport>,
    pub spectrum: Vec<SpectrumBoundReport>,
}

impl BoundsReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

const TAYLOR_STEPS: [f64; 4] = [0.05, 0.1, 0.2, 0.5];

fn taylor_suite(report: &mut BoundsReport) -> HarnessResult<()> {
    for p in 0..=5usize {
        let fact: f64 = (1..=p + 1).map(|k| k as f64).product();
        for l in [1.0, fact] {
            let rows = TAYLOR_STEPS
                .iter()
                .map(|&h| verify_taylor_attainment(p, h, l))
                .collect::<crate::Result<Vec<_>>>()?;
            for r in &rows {
                report.checks.push(Check {
                    name: format!("attainment P={p} h={} L={l}", r.step),
                    passed: r.passed,
                    detail: format!("attained {:e}, bound {:e}", r.attained, r.bound),
                });
            }
            for w in rows.windows(2) {
                let slope = (w[1].bound / w[0].bound).ln() / (w[1].step / w[0].step).ln();
                report.checks.push(Check {
                    name: format!("log-log slope P={p} L={l} h={}..{}", w[0].step, w[1].step),
                    passed: (slope - (p + 1) as f64).abs() <= 1e-9,
                    detail: format!("slope {slope}"),
                });
            }
            report.taylor.extend(rows);
        }
    }
    Ok(())
}

fn chebyshev_suite(report: &mut BoundsReport) {
    let pole = KnownChannel::inverse_pole();
    let degrees: Vec<usize> = (0..=12).collect();
    let decay = verify_cheb_decay(&|tau| pole.eval_tau(tau), &pole.ellipse, &degrees);
    report.checks.extend(decay.checks.iter().cloned());
    report.decay.push(decay);
    for m in 3..=8 {
        let e = interpolation_error(&|x| x * x * x, m);
        report.checks.push(Check {
            name: format!("cubic exact M={m}"),
            passed: e <= 1e-12,
            detail: format!("error {e:e}"),
        });
    }
    for m in 0..=8 {
        let e = interpolation_error(&|_| 5.0, m);
        report.checks.push(Check {
            name: format!("constant exact M={m}"),
            passed: e <= 1e-12,
            detail: format!("error {e:e}"),
        });
    }
}

fn spectrum_suite(report: &mut BoundsReport) -> HarnessResult<()> {
    for channel in [KnownChannel::exp(), KnownChannel::inverse_pole()] {
        for lambda in [0.0, 0.1, 10.0] {
            let cfg = SpectrumCheckConfig {
                spectrum: SpectrumConfig { degree: 4, lambda },
                ..Default::default()
            };
            let r = verify_spectrum_bound(&channel, &cfg)?;
            report.checks.extend(r.checks.iter().cloned());
            report.spectrum.push(r);
        }
    }
    Ok(())
}

/// Runs the named verification suite and writes `bounds_<suite>.json`.
pub fn cmd_bounds(suite: &str, output_dir: &Path) -> HarnessResult<BoundsReport> {
    let suite: BoundsSuite = suite.parse()?;
    let mut report = BoundsReport {
        suite: suite.name().to_string(),
        passed: false,
        checks: Vec::new(),
        taylor: Vec::new(),
        decay: Vec::new(),
        spectrum: Vec::new(),
    };
    if suite.includes(BoundsSuite::Taylor) {
        taylor_suite(&mut report)?;
    }
    if suite.includes(BoundsSuite::Chebyshev) {
        chebyshev_suite(&mut report);
    }
    if suite.includes(BoundsSuite::Spectrum) {
        spectrum_suite(&mut report)?;
    }
    report.passed = report.checks.iter().all(|c| c.passed);
    write_file(output_dir, &format!("bounds_{}.json", suite.name()), &to_json(&report))?;
    Ok(report)
}

/// Parses `v1,v2,…`; on the alpha axis each entry may be `alpha:interval`.
pub fn parse_sweep_points(axis: SweepAxis, text: &str) -> HarnessResult<Vec<SweepPoint>> {
    let bad = |item: &str| HarnessError::Usage(format!("cannot parse sweep value {item:?}"));
    text.split(',')
        .map(str::trim)
        .map(|item| {
            let (v, interval) = match item.split_once(':') {
                Some((v, i)) if axis == SweepAxis::Alpha => (v, Some(i.parse::<usize>().map_err(|_| bad(item))?)),
                Some(_) => return Err(bad(item)),
                None => (item, None),
            };
            let value = v.parse::<f64>().map_err(|_| bad(item))?;
            Ok(SweepPoint { value, interval })
        })
        .collect()
}

/// Runs the sweep and writes `sweep_<axis>.csv`
/// (`axis_value,interval,mean_rmse,nfe`).
pub fn cmd_sweep(
    axis: &str,
    config: Option<&Path>,
    values: Option<&str>,
    output_override: Option<&Path>,
) -> HarnessResult<Vec<SweepRow>> {
    let axis: SweepAxis = axis.parse().map_err(|e: crate::Error| HarnessError::Usage(e.to_string()))?;
    let cfg = match config {
        Some(p) => SweepConfig::load(p).map_err(|e| HarnessError::Config(e.to_string()))?,
        None => SweepConfig::default(),
    };
    let points = match values {
        Some(v) => parse_sweep_points(axis, v)?,
        None => cfg.points.clone().unwrap_or_else(|| axis.default_points()),
    };
    let configured = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let out_dir = resolve_output_dir(output_override, &configured);
    let rows = sweep_report(axis, &points, &cfg.base).map_err(|e| HarnessError::Config(e.to_string()))?;

    let mut csv = String::from("axis_value,interval,mean_rmse,nfe\n");
    let mut timing = String::from("axis_value,wall_seconds\n");
    for r in &rows {
        writeln!(csv, "{},{},{},{}", r.axis_value, r.interval, r.mean_rmse, r.nfe).unwrap();
        writeln!(timing, "{},{}", r.axis_value, r.wall_seconds).unwrap();
    }
    write_file(&out_dir, &format!("sweep_{axis}.csv"), &csv)?;
    write_file(&out_dir, &format!("sweep_{axis}.timing.log"), &timing)?;
    Ok(rows)
}
