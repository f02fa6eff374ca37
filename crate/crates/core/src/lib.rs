//! Training-free feature forecasting for diffusion samplers.
//!
//! Cached denoiser features are fitted with a ridge-regularized Chebyshev
//! expansion in time and extrapolated to skipped steps.

pub mod analysis;
pub mod chebyshev;
pub mod config;
pub mod error;
pub mod forecast;
pub mod harness;
pub mod linalg;
pub mod ridge;
pub mod sandbox;
pub mod schedule;

pub use error::{Error, Result};
