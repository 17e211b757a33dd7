//! Credible intervals and induced posteriors for return levels and extreme quantiles.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mcmc::PosteriorChain;
use super::theta_post::ThetaPosterior;
use crate::error::{Error, Result};
use crate::freq::intervals::loglog_of_power;
use crate::gev::quantile_from_loglog;
use crate::interval::Interval;
use crate::stats::{mean, quantile_sorted, sd, z_two_sided};

/// A one-dimensional posterior that can report its mean, spread and quantiles.
pub trait PosteriorSummary {
    fn mean(&self) -> f64;
    fn sd(&self) -> f64;
    fn quantile(&self, p: f64) -> f64;
}

/// Posterior draws, sorted once on construction.
#[derive(Debug, Clone)]
pub struct Samples {
    sorted: Vec<f64>,
    mean: f64,
    sd: f64,
}

impl Samples {
    pub fn new(draws: &[f64]) -> Result<Self> {
        if draws.len() < 2 {
            return Err(Error::InvalidArgument("need at least two posterior draws".into()));
        }
        let mut sorted = draws.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { mean: mean(draws), sd: sd(draws), sorted })
    }
}

impl PosteriorSummary for Samples {
    fn mean(&self) -> f64 {
        self.mean
    }

    fn sd(&self) -> f64 {
        self.sd
    }

    fn quantile(&self, p: f64) -> f64 {
        quantile_sorted(&self.sorted, p)
    }
}

impl PosteriorSummary for ThetaPosterior {
    fn mean(&self) -> f64 {
        ThetaPosterior::mean(self)
    }

    fn sd(&self) -> f64 {
        ThetaPosterior::sd(self)
    }

    fn quantile(&self, p: f64) -> f64 {
        ThetaPosterior::quantile(self, p)
    }
}

/// `[mean - b̂ ± z sd]`.
pub fn credible_interval_symmetric<P: PosteriorSummary + ?Sized>(post: &P, alpha: f64, b_hat: f64) -> Interval {
    let c = post.mean() - b_hat;
    let half = z_two_sided(alpha) * post.sd();
    Interval::new(c - half, c + half)
}

/// Equal-tailed `[α/2, 1-α/2]` posterior quantiles.
pub fn credible_interval_asymmetric<P: PosteriorSummary + ?Sized>(post: &P, alpha: f64) -> Interval {
    Interval::new(post.quantile(alpha / 2.0), post.quantile(1.0 - alpha / 2.0))
}

/// Pushes each draw through `μ + σ Q_γ(τ^{m/m*})`.
pub fn rl_posterior(chain: &PosteriorChain, tau: f64, m: usize, m_star: usize) -> Result<Vec<f64>> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!("probability level must lie in (0,1), got {tau}")));
    }
    let ell = loglog_of_power(tau, m as f64 / m_star as f64);
    Ok(chain.draws.iter().map(|p| p.mu + p.sigma * quantile_from_loglog(ell, p.gamma)).collect())
}

/// Pairs each draw with an independent `θ` from `theta_post` and maps through
/// `μ + σ Q_γ(τ_E^{mθ})`.
pub fn var_posterior(chain: &PosteriorChain, theta_post: &ThetaPosterior, tau_e: f64, m: usize, seed: u64) -> Result<Vec<f64>> {
    if !(tau_e > 0.0 && tau_e < 1.0) {
        return Err(Error::InvalidArgument(format!("probability level must lie in (0,1), got {tau_e}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    chain
        .draws
        .iter()
        .map(|p| {
            let theta = theta_post.sample(&mut rng);
            if tau_e.powf(m as f64 * theta) == 0.0 {
                return Err(Error::LevelTooExtreme);
            }
            let ell = loglog_of_power(tau_e, m as f64 * theta);
            Ok(p.mu + p.sigma * quantile_from_loglog(ell, p.gamma))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::theta_post::{theta_posterior, ThetaPriorSpec};
    use crate::blocks::PseudoObs;
    use crate::freq::return_level_point;
    use crate::gev::{gev_model_quantile, GevParams};

    fn constant_chain(p: GevParams, n: usize) -> PosteriorChain {
        PosteriorChain { draws: vec![p; n], log_post: vec![0.0; n], acceptance_rate: 0.2, ess: [1.0; 3], seed: 0 }
    }

    #[test]
    fn symmetric_interval_centered_at_mean() {
        let s = Samples::new(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let ci = credible_interval_symmetric(&s, 0.1, 0.0);
        assert!((ci.midpoint() - 3.0).abs() < 1e-12);
        let a = credible_interval_asymmetric(&s, 0.5);
        assert!(a.lower < a.upper);
    }

    #[test]
    fn constant_chain_pushforward() {
        let p = GevParams::new(0.2, 1.0, 2.0).unwrap();
        let chain = constant_chain(p, 10);
        let rl = rl_posterior(&chain, 0.9, 30, 300).unwrap();
        let point = return_level_point(&p, 0.9, 30, 300).unwrap();
        assert!(rl.iter().all(|v| *v == point));
        assert_eq!(mean(&rl), point);
    }

    #[test]
    fn point_mass_theta_reduces_to_model_quantile() {
        let p = GevParams::new(0.1, 0.0, 1.0).unwrap();
        let chain = constant_chain(p, 50);
        // all pseudo-observations zero and heavy atom: posterior concentrates at 1
        let y = PseudoObs { y: vec![0.0; 50_000], m_tilde: 1, k_tilde: 50_000 };
        let prior = ThetaPriorSpec { atom_mass: 0.999_999, ..Default::default() };
        let tp = theta_posterior(&y, &prior, false, None).unwrap();
        assert!(tp.atom_weight > 1.0 - 1e-9);
        let v = var_posterior(&chain, &tp, 0.99, 1, 7).unwrap();
        let direct = gev_model_quantile(0.99, &p).unwrap();
        assert!(v.iter().all(|x| (x - direct).abs() < 1e-12));
        assert_eq!(v, var_posterior(&chain, &tp, 0.99, 1, 7).unwrap());
    }
}
