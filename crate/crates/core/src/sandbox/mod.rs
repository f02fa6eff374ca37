//! Synthetic denoisers and the sampling loop that exercises the forecasters.

mod denoiser;
mod sampler;
mod suite;

pub use denoiser::{
    analytic_denoiser, standard_normal, Block, BlockStack, Channel, DenoiserKind, DenoiserOutput, DenoiserSpec,
    GaussianMixture, MixtureComponent,
};
pub use sampler::{euler_step, rmse_vs_oracle, run_sampler, CachingMode, SolverConfig, StepFlag, TrajectoryRecord};
pub use suite::{initial_latent, MixtureSuite, SeedRun, SuiteInstance};
