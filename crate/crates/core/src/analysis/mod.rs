//! Error bounds for the forecasters and the ablation sweeps.

mod bounds;
mod sweep;

pub use bounds::*;
pub use sweep::*;
