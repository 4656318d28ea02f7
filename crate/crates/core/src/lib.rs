//! Bayesian variable selection for generalized linear models under nonlocal
//! priors.
//!
//! Two prior families are provided: the product inverse-moment prior (piMOM)
//! and its inverse-gamma scale mixture (spiMOM), whose kernel decays like
//! `exp(-2 sqrt(lambda) / |beta|)`. For each candidate submodel the crate finds
//! the posterior mode inside the MLE's orthant, forms a Laplace approximation
//! of the marginal likelihood, and turns those into model posterior
//! probabilities under a uniform prior on models of size at most `q`.
//!
//! The [`experiments`] module is a seeded simulation harness for the rate and
//! consistency behaviour of the posterior mode and the model posterior.

// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod experiments;
pub mod glm;
pub mod modelspace;
pub mod numerics;
pub mod posterior;
pub mod priors;

pub use error::{Error, Result};
pub use exec::Execution;
pub use glm::{Dataset, Family, GlmFit};
pub use modelspace::{ModelIndex, ModelPosterior};
pub use numerics::{RandomStream, SpdMatrix};
pub use posterior::PosteriorFit;
pub use priors::{NonlocalPrior, PriorKind};
