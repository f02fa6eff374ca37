//! `spectral`: schedules, sandbox simulations, bound checks and sweeps.
//!
//! Exit codes: 0 success, 1 a verification assertion failed, 2 usage or
//! configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spectral_forecast::harness::{self, HarnessError};
use spectral_forecast::schedule::ScheduleParams;

#[derive(Parser)]
#[command(name = "spectral", version, about = "Chebyshev feature forecasting sandbox")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the full-pass indices, NFE and speedup of a schedule.
    Schedule {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        interval: usize,
        #[arg(long, default_value_t = 5)]
        warmup: usize,
        #[arg(long, default_value_t = 3.0)]
        alpha: f64,
    },
    /// Run the sandbox experiments described by a JSON config.
    Simulate {
        config: PathBuf,
        /// Output directory; overrides SPECTRAL_OUTPUT_DIR and the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify the error bounds: taylor, chebyshev, spectrum or all.
    Bounds {
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep lambda, degree or alpha on the mixture benchmark.
    Sweep {
        axis: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated values; alpha entries may be `alpha:interval`.
        #[arg(long)]
        values: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(e: HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Schedule {
            n,
            interval,
            warmup,
            alpha,
        } => {
            let params = ScheduleParams {
                n_steps: n,
                interval,
                warmup,
                alpha,
            };
            match harness::cmd_schedule(&params) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Simulate { config, out } => match harness::cmd_simulate(&config, out.as_deref()) {
            Ok(summary) => {
                for r in &summary.runs {
                    println!(
                        "{}: forecaster={} NFE={} mean_final_rmse={}",
                        r.label, r.forecaster, r.nfe, r.mean_final_rmse
                    );
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Bounds { suite, out } => {
            let dir = harness::resolve_output_dir(out.as_deref(), &PathBuf::from("out"));
            match harness::cmd_bounds(&suite, &dir) {
                Ok(report) => {
                    let failed: Vec<_> = report.failures().collect();
                    for c in &failed {
                        eprintln!("FAIL {}: {}", c.name, c.detail);
                    }
                    println!("{}: {}/{} checks passed", report.suite, report.checks.len() - failed.len(), report.checks.len());
                    if failed.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Sweep {
            axis,
            config,
            values,
            out,
        } => match harness::cmd_sweep(&axis, config.as_deref(), values.as_deref(), out.as_deref()) {
            Ok(rows) => {
                for r in &rows {
                    println!("{axis}={} interval={} NFE={} mean_rmse={}", r.axis_value, r.interval, r.nfe, r.mean_rmse);
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
