//! Data-augmentation Gibbs samplers for the spike-and-slab selection model.
//!
//! One sweep runs the ten update steps in a fixed order: latent utilities,
//! the selection-equation coefficient block, the outcome block jointly with
//! the regression form of the error covariance, the residual variance, the
//! inclusion indicators and their common rate, and finally the scale-mixture
//! variables. Every conditional is closed-form for point-mass, Exp(1/2), and
//! inverse-gamma mixing.

mod output;
mod sampler;

pub use output::{read_draws, ChainOutput, Draw};
pub use sampler::{
    run_chain, run_chain_seeded, GibbsConfig, GibbsSampler, InitStrategy, ParameterState,
};
