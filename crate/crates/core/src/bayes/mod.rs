//! Empirical-Bayes inference: data-dependent priors, posterior sampling, the
//! extremal-index posterior and credible intervals.

pub mod mcmc;
pub mod prior;
pub mod summary;
pub mod theta_post;

pub use mcmc::{importance_diagnostic, sample_posterior, ChainConfig, ImportanceDiagnostic, PosteriorChain};
pub use prior::{log_posterior_unnorm, log_prior, CompiledPrior, LocationBase, PriorSpec, ScaleBase, ShapePrior};
pub use summary::{
    credible_interval_asymmetric, credible_interval_symmetric, rl_posterior, var_posterior, PosteriorSummary, Samples,
};
pub use theta_post::{theta_posterior, ThetaDensity, ThetaPosterior, ThetaPosteriorMeta, ThetaPriorSpec};
