//! Bayesian variable selection for bivariate-normal sample selection models.
//!
//! The crate provides:
//!
//! - [`dist`]: statistically validated sampling kernels (truncated normal,
//!   inverse gamma, inverse Gaussian, beta, multivariate normal) and
//!   tail-safe normal density/CDF evaluations;
//! - [`model`]: the two-equation model, its exact log-likelihood, the
//!   working reparametrization, and the two-step and maximum likelihood
//!   fitters;
//! - [`priors`]: Class I and Class II continuous spike-and-slab priors with
//!   point-mass, Laplace, and Student-t scale mixing, plus their default
//!   calibration;
//! - [`gibbs`]: the closed-form data-augmentation Gibbs sampler;
//! - [`posterior`]: inclusion probabilities, the median probability model,
//!   conditional-on-model summaries, and importance-sampling leave-one-out;
//! - [`stepwise`]: forward stepwise selection with AIC as a baseline;
//! - [`sim`]: the replicated simulation benchmark with TMR / size /
//!   sensitivity / specificity reporting.

pub mod dist;
mod error;
pub mod gibbs;
pub mod model;
pub mod posterior;
pub mod priors;
pub mod rng;
pub mod sim;
pub mod stepwise;

pub use error::{Error, Result};
pub use rng::RngStream;
