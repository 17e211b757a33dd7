//! Frequentist inference: maximum likelihood, information matrices, the extremal index
//! and confidence intervals.

pub mod info;
pub mod intervals;
pub mod mle;
pub mod optim;
pub mod theta;

pub use info::{expected_information, expected_information_inverse};
pub use intervals::{
    asymmetric_mc_interval, ci_asymmetric_mc, ci_gamma_symmetric, ci_return_level_symmetric, ci_theta_symmetric,
    ci_var_symmetric, return_level_point, var_point, RiskQuery, RiskTarget, DEFAULT_MC_DRAWS,
};
pub use mle::{fit_gev_mle, gev_loglik, numerical_hessian, pwm_estimate, GevFit, DEFAULT_Q};
pub use theta::{fit_theta, sigma_tilde_sq_at_origin, theta_mle, theta_sliding_variance, ThetaFit, DEFAULT_K};
