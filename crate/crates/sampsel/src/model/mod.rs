//! Sample selection model: data structures, exact log-likelihood, the
//! working reparametrization, and the frequentist fitters.

pub(crate) mod bfgs;
mod data;
mod fit;
mod likelihood;
mod params;

pub use data::Dataset;
pub use fit::{mle_fit, two_step_fit, FitResult};
pub(crate) use fit::with_intercept;
pub use likelihood::log_likelihood;
pub use params::{inverse_mills, to_natural, to_working, NaturalParams, WorkingParams};
