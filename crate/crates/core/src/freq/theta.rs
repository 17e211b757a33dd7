//! Extremal-index estimation from disjoint-block pseudo-observations.

use serde::{Deserialize, Serialize};

use crate::blocks::{block_maxima, pseudo_observations, Ecdf, PseudoObs};
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 10;

/// Extremal-index estimate `θ̂` with its sliding-origin variance estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaFit {
    pub theta_hat: f64,
    /// `σ̃²`, so that `θ̂⁴σ̃²/k̃` estimates the variance of `θ̂`.
    pub sigma_tilde_sq: f64,
    pub k_origins: usize,
    pub k_tilde: usize,
    pub m_tilde: usize,
    pub var_hat: f64,
    pub pseudo: PseudoObs,
}

impl ThetaFit {
    /// Standard error `θ̂²σ̃/√k̃`.
    pub fn std_error(&self) -> f64 {
        self.var_hat.sqrt()
    }
}

/// Maximizer of `log θ - θȲ` over `(0, 1]`, i.e. `min(1, k̃/ΣŶ)`.
pub fn theta_mle(pseudo: &PseudoObs) -> f64 {
    let s = pseudo.sum();
    if s <= pseudo.k_tilde as f64 {
        1.0
    } else {
        pseudo.k_tilde as f64 / s
    }
}

/// `σ̃²_{n,j}` for a 1-based origin `j`, using the first `nb` blocks of `series[j-1..]`.
///
/// Each pseudo-observation is corrected by the influence of the empirical cdf:
/// `C_i = Σ_{s ∈ block i} (1/nb) Σ_l (1 - 1{X_s ≤ M_l}/F(M_l))`.
pub fn sigma_tilde_sq_at_origin(series: &[f64], m_tilde: usize, origin: usize, nb: usize) -> Result<f64> {
    if origin == 0 || origin > series.len() {
        return Err(Error::InvalidArgument(format!("origin {origin} outside the series")));
    }
    let suffix = &series[origin - 1..];
    if nb == 0 || suffix.len() < nb * m_tilde {
        return Err(Error::SeriesTooShort { needed: origin - 1 + nb.max(1) * m_tilde, got: series.len() });
    }
    let cdf = Ecdf::new(series, origin)?;
    let maxima = &block_maxima(suffix, m_tilde, 0)?[..nb];
    let f: Vec<f64> = maxima.iter().map(|&mx| cdf.eval(mx)).collect();
    let y: Vec<f64> = f
        .iter()
        .map(|&v| if v >= 1.0 { 0.0 } else { -(m_tilde as f64) * v.ln() })
        .collect();
    let nbf = nb as f64;
    let y_bar = y.iter().sum::<f64>() / nbf;

    // tail[r] = Σ over the maxima ranked r.. (ascending) of 1/F(M)
    let mut order: Vec<usize> = (0..nb).collect();
    order.sort_by(|&a, &b| maxima[a].total_cmp(&maxima[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| maxima[i]).collect();
    let mut tail = vec![0.0; nb + 1];
    for r in (0..nb).rev() {
        tail[r] = tail[r + 1] + 1.0 / f[order[r]];
    }

    let mut acc = 0.0;
    for (i, block) in suffix.chunks(m_tilde).take(nb).enumerate() {
        let mut c = 0.0;
        for &x in block {
            let first_ge = sorted.partition_point(|&v| v < x);
            c += 1.0 - tail[first_ge] / nbf;
        }
        let d = y[i] - y_bar + c;
        acc += d * d;
    }
    Ok(acc / nbf)
}

/// Sliding-origin estimator `σ̃² = K⁻¹(σ̃²_{n,1} + Σ_{i=2}^K σ̃²_{n,⌈(i-1)m̃/K⌉+1})`.
pub fn theta_sliding_variance(series: &[f64], m_tilde: usize, k_origins: usize) -> Result<f64> {
    if k_origins == 0 {
        return Err(Error::InvalidArgument("number of origins K must be positive".into()));
    }
    if m_tilde == 0 {
        return Err(Error::InvalidArgument("block size must be positive".into()));
    }
    let n = series.len();
    if n < 2 * m_tilde {
        return Err(Error::SeriesTooShort { needed: 2 * m_tilde, got: n });
    }
    let k_tilde = n / m_tilde;
    let mut total = sigma_tilde_sq_at_origin(series, m_tilde, 1, k_tilde)?;
    for i in 2..=k_origins {
        let j = ((i - 1) * m_tilde).div_ceil(k_origins) + 1;
        total += sigma_tilde_sq_at_origin(series, m_tilde, j, k_tilde - 1)?;
    }
    Ok(total / k_origins as f64)
}

/// Fits `θ̂` and `σ̃²` with block size `m̃` and `K` origins.
pub fn fit_theta(series: &[f64], m_tilde: usize, k_origins: usize) -> Result<ThetaFit> {
    let sigma_tilde_sq = theta_sliding_variance(series, m_tilde, k_origins)?;
    let pseudo = pseudo_observations(series, m_tilde, 1)?;
    let theta_hat = theta_mle(&pseudo);
    let k_tilde = pseudo.k_tilde;
    Ok(ThetaFit {
        theta_hat,
        sigma_tilde_sq,
        k_origins,
        k_tilde,
        m_tilde,
        var_hat: theta_hat.powi(4) * sigma_tilde_sq / k_tilde as f64,
        pseudo,
    })
}
