//! Confidence intervals for the shape, return levels, extreme quantiles and the
//! extremal index.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mle::GevFit;
use super::theta::ThetaFit;
use crate::error::{Error, Result};
use crate::gev::{dquantile_from_loglog, quantile_from_loglog, GevParams};
use crate::interval::Interval;
use crate::stats::{quantile_sorted, z_two_sided};

pub const DEFAULT_MC_DRAWS: usize = 50_000;

/// What is being estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RiskTarget {
    /// `R^{(m*)}(τ)`: the `τ`-quantile of the maximum over a block of size `m_star`.
    ReturnLevel { tau: f64, m_star: usize },
    /// `Q(τ_E)`: the marginal quantile at an extreme level.
    Var { tau_e: f64 },
}

/// A risk target together with the fitted block size and the interval settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskQuery {
    pub target: RiskTarget,
    /// Block size `m` used for the GEV fit.
    pub m: usize,
    pub alpha: f64,
    pub b_hat: f64,
}

impl RiskQuery {
    pub fn return_level(tau: f64, m: usize, m_star: usize, alpha: f64) -> Self {
        Self { target: RiskTarget::ReturnLevel { tau, m_star }, m, alpha, b_hat: 0.0 }
    }

    pub fn var(tau_e: f64, m: usize, alpha: f64) -> Self {
        Self { target: RiskTarget::Var { tau_e }, m, alpha, b_hat: 0.0 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if self.m == 0 {
            return Err(Error::InvalidArgument("block size must be positive".into()));
        }
        match self.target {
            RiskTarget::ReturnLevel { tau, m_star } => {
                check_level(tau)?;
                if m_star < self.m {
                    return Err(Error::InvalidArgument(format!("m* = {m_star} must be at least m = {}", self.m)));
                }
            }
            RiskTarget::Var { tau_e } => check_level(tau_e)?,
        }
        Ok(())
    }
}

fn check_level(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("probability level must lie in (0,1), got {tau}")))
    }
}

/// `log(-log(τ^e))`, computed without forming `τ^e`.
pub(crate) fn loglog_of_power(tau: f64, exponent: f64) -> f64 {
    exponent.ln() + (-(tau - 1.0).ln_1p()).ln()
}

/// `log(-log(τ_E^{mθ}))`, failing when `τ_E^{mθ}` underflows.
fn var_loglog(tau_e: f64, m: usize, theta: f64) -> Result<f64> {
    if tau_e.powf(m as f64 * theta) == 0.0 {
        return Err(Error::LevelTooExtreme);
    }
    Ok(loglog_of_power(tau_e, m as f64 * theta))
}

fn rl_loglog(tau: f64, m: usize, m_star: usize) -> f64 {
    loglog_of_power(tau, m as f64 / m_star as f64)
}

fn require_inverse(fit: &GevFit) -> Result<&[[f64; 3]; 3]> {
    fit.info_inv_standardized.as_ref().ok_or(Error::NotPositiveDefinite)
}

fn quad_form(v: [f64; 3], a: &[[f64; 3]; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += v[i] * a[i][j] * v[j];
        }
    }
    s
}

/// `[γ̂ - b̂ ± z ψ̂/√k]` with `ψ̂² = (Î⁻¹)₁₁`.
pub fn ci_gamma_symmetric(fit: &GevFit, alpha: f64, b_hat: f64) -> Result<Interval> {
    let inv = require_inverse(fit)?;
    let half = z_two_sided(alpha) * inv[0][0].sqrt() / (fit.k as f64).sqrt();
    let c = fit.params.gamma - b_hat;
    Ok(Interval::new(c - half, c + half))
}

/// `[θ̂ ± z θ̂² σ̃/√k̃] ∩ (0, 1]`.
pub fn ci_theta_symmetric(theta: &ThetaFit, alpha: f64) -> Interval {
    let half = z_two_sided(alpha) * theta.theta_hat.powi(2) * theta.sigma_tilde_sq.sqrt() / (theta.k_tilde as f64).sqrt();
    let lower = (theta.theta_hat - half).max(f64::MIN_POSITIVE);
    let upper = (theta.theta_hat + half).min(1.0);
    Interval::new(lower, upper)
}

/// `μ̂ + σ̂ Q_γ̂(τ^{m/m*})`.
pub fn return_level_point(params: &GevParams, tau: f64, m: usize, m_star: usize) -> Result<f64> {
    check_level(tau)?;
    Ok(params.mu + params.sigma * quantile_from_loglog(rl_loglog(tau, m, m_star), params.gamma))
}

/// `μ̂ + σ̂ Q_γ̂(τ_E^{mθ̂})`.
pub fn var_point(params: &GevParams, theta_hat: f64, tau_e: f64, m: usize) -> Result<f64> {
    check_level(tau_e)?;
    let ell = var_loglog(tau_e, m, theta_hat)?;
    Ok(params.mu + params.sigma * quantile_from_loglog(ell, params.gamma))
}

fn sensitivity(ell: f64, gamma: f64) -> Result<f64> {
    let q = dquantile_from_loglog(ell, gamma);
    if q == 0.0 || !q.is_finite() {
        return Err(Error::DegenerateSensitivity);
    }
    Ok(q)
}

/// Symmetric interval for a return level, `[R̂ - σ̂ q (b̂ ± z ψ̂/√k)]`.
pub fn ci_return_level_symmetric(fit: &GevFit, query: &RiskQuery) -> Result<Interval> {
    query.validate()?;
    let RiskTarget::ReturnLevel { tau, m_star } = query.target else {
        return Err(Error::InvalidArgument("query is not a return-level query".into()));
    };
    let inv = require_inverse(fit)?;
    let p = &fit.params;
    let ell = rl_loglog(tau, query.m, m_star);
    let q = sensitivity(ell, p.gamma)?;
    let big_q = quantile_from_loglog(ell, p.gamma);
    let psi = quad_form([1.0, 1.0 / q, big_q / q], inv).sqrt();
    let point = p.mu + p.sigma * big_q;
    Ok(symmetric_around(point, p.sigma * q, query, psi, fit.k))
}

/// Symmetric interval for an extreme quantile with the extremal-index correction `ς̂`.
pub fn ci_var_symmetric(fit: &GevFit, theta: &ThetaFit, query: &RiskQuery) -> Result<Interval> {
    query.validate()?;
    let RiskTarget::Var { tau_e } = query.target else {
        return Err(Error::InvalidArgument("query is not an extreme-quantile query".into()));
    };
    let inv = require_inverse(fit)?;
    let p = &fit.params;
    let ell = var_loglog(tau_e, query.m, theta.theta_hat)?;
    let q = sensitivity(ell, p.gamma)?;
    let v = if p.gamma >= 0.0 { [1.0, 0.0, 0.0] } else { [1.0, p.gamma * p.gamma, -p.gamma] };
    // L^γ with L = -log τ_E^{mθ̂}
    let l_pow = (p.gamma * ell).exp();
    let varsigma = theta.sigma_tilde_sq * theta.theta_hat.powi(2) / (l_pow * q).powi(2);
    let psi = (quad_form(v, inv) + varsigma).sqrt();
    let point = p.mu + p.sigma * quantile_from_loglog(ell, p.gamma);
    Ok(symmetric_around(point, p.sigma * q, query, psi, fit.k))
}

fn symmetric_around(point: f64, scale: f64, query: &RiskQuery, psi: f64, k: usize) -> Interval {
    let half = z_two_sided(query.alpha) * psi / (k as f64).sqrt();
    Interval::new(point - scale * (query.b_hat - half), point - scale * (query.b_hat + half))
}

/// Monte-Carlo interval from the Gaussian approximation `N(ϑ̂, (-k𝒥_n(ϑ̂))⁻¹)` to the
/// sampling law of the MLE; for extreme quantiles `θ` is drawn from `N(θ̂, θ̂⁴σ̃²/k̃)`
/// truncated to `(0, 1]`.
pub fn ci_asymmetric_mc(
    fit: &GevFit,
    theta: Option<&ThetaFit>,
    query: &RiskQuery,
    draws: usize,
    seed: u64,
) -> Result<Interval> {
    let cov = fit.covariance().ok_or(Error::NotPositiveDefinite)?;
    let theta = theta.map(|t| (t.theta_hat, t.var_hat));
    asymmetric_mc_interval(&fit.params, &cov, fit.shape_upper(), theta, query, draws, seed)
}

/// [`ci_asymmetric_mc`] with an explicit covariance, which may be positive semi-definite.
/// `theta` is `(θ̂, Var θ̂)` and is required for extreme-quantile queries.
/// Parameter draws outside `(-1/2, shape_upper) × ℝ × (0, ∞)` are redrawn.
pub fn asymmetric_mc_interval(
    center: &GevParams,
    cov: &[[f64; 3]; 3],
    shape_upper: f64,
    theta: Option<(f64, f64)>,
    query: &RiskQuery,
    draws: usize,
    seed: u64,
) -> Result<Interval> {
    query.validate()?;
    if draws == 0 {
        return Err(Error::InvalidArgument("draw count must be positive".into()));
    }
    let root = psd_root(cov)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (theta_hat, theta_sd) = match (query.target, theta) {
        (RiskTarget::Var { .. }, None) => {
            return Err(Error::InvalidArgument("extreme-quantile interval needs an extremal-index fit".into()))
        }
        (_, Some((t, v))) => (t, v.max(0.0).sqrt()),
        (_, None) => (1.0, 0.0),
    };
    let c = Vector3::from(center.as_array());
    let max_attempts = 1000 * draws.max(100);
    let mut attempts = 0usize;
    let mut values = Vec::with_capacity(draws);
    while values.len() < draws {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Numerical("too many Monte-Carlo draws outside the parameter space".into()));
        }
        let z = Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        let d = c + root * z;
        if !(d[0] > -0.5 && d[0] < shape_upper && d[2] > 0.0) {
            continue;
        }
        let ell = match query.target {
            RiskTarget::ReturnLevel { tau, m_star } => rl_loglog(tau, query.m, m_star),
            RiskTarget::Var { tau_e } => {
                let t = truncated_theta(&mut rng, theta_hat, theta_sd);
                var_loglog(tau_e, query.m, t)?
            }
        };
        values.push(d[1] + d[2] * quantile_from_loglog(ell, d[0]));
    }
    values.sort_by(f64::total_cmp);
    let a = query.alpha / 2.0;
    Ok(Interval::new(quantile_sorted(&values, a), quantile_sorted(&values, 1.0 - a)))
}

fn truncated_theta<R: Rng>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return mean;
    }
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let t = mean + sd * z;
        if t > 0.0 && t <= 1.0 {
            return t;
        }
    }
}

/// Symmetric square root `V Λ^{1/2}` of a positive semi-definite matrix.
fn psd_root(cov: &[[f64; 3]; 3]) -> Result<Matrix3<f64>> {
    let m = Matrix3::from(*cov).transpose();
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    let eig = SymmetricEigen::new(m);
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut lambda = eig.eigenvalues;
    for v in lambda.iter_mut() {
        if *v < -1e-10 * scale {
            return Err(Error::NotPositiveDefinite);
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(eig.eigenvectors * Matrix3::from_diagonal(&lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_fit(params: GevParams, inv: [[f64; 3]; 3], k: usize) -> GevFit {
        GevFit {
            params,
            loglik: 0.0,
            observed_info: [[k as f64, 0.0, 0.0], [0.0, k as f64, 0.0], [0.0, 0.0, k as f64]],
            info_inv_standardized: Some(inv),
            k,
            q: 0.5,
            converged: true,
        }
    }

    const ID: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    #[test]
    fn gamma_interval_examples() {
        let fit = fake_fit(GevParams::new(0.3, 0.0, 1.0).unwrap(), ID, 100);
        let ci = ci_gamma_symmetric(&fit, 0.05, 0.0).unwrap();
        assert!((ci.lower - (0.3 - 0.1959964)).abs() < 1e-6);
        assert!((ci.upper - (0.3 + 0.1959964)).abs() < 1e-6);
        let shifted = ci_gamma_symmetric(&fit, 0.05, 0.1).unwrap();
        assert!((shifted.lower - ci.lower + 0.1).abs() < 1e-12);
        assert!((shifted.upper - ci.upper + 0.1).abs() < 1e-12);
    }

    #[test]
    fn theta_interval_examples() {
        let t = ThetaFit {
            theta_hat: 0.5,
            sigma_tilde_sq: 4.0,
            k_origins: 1,
            k_tilde: 100,
            m_tilde: 1,
            var_hat: 0.0,
            pseudo: crate::blocks::PseudoObs { y: vec![], m_tilde: 1, k_tilde: 100 },
        };
        let ci = ci_theta_symmetric(&t, 0.05);
        assert!((ci.lower - 0.402).abs() < 1e-3 && (ci.upper - 0.598).abs() < 1e-3);
        let one = ThetaFit { theta_hat: 1.0, sigma_tilde_sq: 1e-12, ..t };
        assert_eq!(ci_theta_symmetric(&one, 0.05).upper, 1.0);
    }

    #[test]
    fn return_level_point_examples() {
        let p = GevParams::new(0.0, 0.0, 1.0).unwrap();
        assert!((return_level_point(&p, 0.9, 30, 30).unwrap() - 2.250367).abs() < 1e-6);
        assert!(return_level_point(&p, 0.9, 30, 300).unwrap() > return_level_point(&p, 0.9, 30, 30).unwrap());
    }

    #[test]
    fn return_level_interval_quadratic_form() {
        let fit = fake_fit(GevParams::new(0.0, 0.0, 1.0).unwrap(), ID, 100);
        let ci = ci_return_level_symmetric(&fit, &RiskQuery::return_level(0.9, 30, 30, 0.05)).unwrap();
        let ell = (-(0.9f64).ln()).ln();
        let q = ell * ell / 2.0;
        let psi = (1.0 + 1.0 / (q * q) + (ell / q).powi(2)).sqrt();
        let half = 1.959963985 * psi / 10.0 * q;
        assert!((ci.midpoint() - 2.250367).abs() < 1e-6);
        assert!((ci.width() / 2.0 - half).abs() < 1e-6);
    }

    #[test]
    fn var_point_examples() {
        let p = GevParams::new(0.0, 0.0, 1.0).unwrap();
        assert!((var_point(&p, 0.5, 1.0 - 1e-3, 100).unwrap() - 2.9952).abs() < 1e-4);
        let p = GevParams::new(0.2, 1.0, 2.0).unwrap();
        let direct = crate::gev::gev_model_quantile(0.99, &p).unwrap();
        assert!((var_point(&p, 1.0, 0.99, 1).unwrap() - direct).abs() < 1e-12);
        assert_eq!(var_point(&p, 1.0, 0.01, 1000), Err(Error::LevelTooExtreme));
    }

    #[test]
    fn var_interval_reduces_without_correction() {
        let inv = [[2.0, 0.3, 0.1], [0.3, 1.0, 0.0], [0.1, 0.0, 1.5]];
        let fit = fake_fit(GevParams::new(0.2, 0.0, 1.0).unwrap(), inv, 100);
        let mut t = ThetaFit {
            theta_hat: 0.7,
            sigma_tilde_sq: 0.0,
            k_origins: 1,
            k_tilde: 50,
            m_tilde: 10,
            var_hat: 0.0,
            pseudo: crate::blocks::PseudoObs { y: vec![], m_tilde: 10, k_tilde: 50 },
        };
        let query = RiskQuery::var(0.999, 30, 0.05);
        let plain = ci_var_symmetric(&fit, &t, &query).unwrap();
        let ell = loglog_of_power(0.999, 30.0 * 0.7);
        let q = dquantile_from_loglog(ell, 0.2);
        let expect = 1.959963985 * 2f64.sqrt() / 10.0 * q;
        assert!((plain.width() / 2.0 - expect).abs() < 1e-6);
        t.sigma_tilde_sq = 1.0;
        assert!(ci_var_symmetric(&fit, &t, &query).unwrap().width() > plain.width());
    }

    #[test]
    fn mc_degenerate_and_deterministic() {
        let p = GevParams::new(0.1, 1.0, 2.0).unwrap();
        let q = RiskQuery::return_level(0.9, 10, 100, 0.05);
        let ci = asymmetric_mc_interval(&p, &[[0.0; 3]; 3], 10.0, None, &q, 1000, 1).unwrap();
        let point = return_level_point(&p, 0.9, 10, 100).unwrap();
        assert!((ci.lower - point).abs() < 1e-12 && (ci.upper - point).abs() < 1e-12);

        let cov = [[0.01, 0.0, 0.0], [0.0, 0.04, 0.01], [0.0, 0.01, 0.02]];
        let a = asymmetric_mc_interval(&p, &cov, 10.0, None, &q, 5000, 9).unwrap();
        let b = asymmetric_mc_interval(&p, &cov, 10.0, None, &q, 5000, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.contains(point));
        let bad = [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(asymmetric_mc_interval(&p, &bad, 10.0, None, &q, 10, 1), Err(Error::NotPositiveDefinite));
    }
}
