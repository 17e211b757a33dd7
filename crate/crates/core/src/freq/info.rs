//! Expected (Fisher) information of one GEV observation.

use nalgebra::Matrix3;

use super::mle::to_array;
use crate::error::{Error, Result};
use crate::gev::{log_density_derivatives, quantile_from_loglog, GevParams};
use crate::quad::gauss_legendre_composite;

/// `I(ϑ) = -∫₀¹ ∂²ℓ_ϑ/∂ϑ∂ϑᵀ (μ + σ Q_γ(u)) du`.
///
/// The integral is taken in `v = log(-log u)`, where the integrand decays like
/// `exp((1+2γ)v)` as `v → -∞` and doubly exponentially as `v → ∞`. A composite
/// Gauss–Legendre rule covers the bulk finely and the slow left tail coarsely.
pub fn expected_information(params: &GevParams) -> Result<[[f64; 3]; 3]> {
    let gamma = params.gamma;
    if !(gamma > -0.5) {
        return Err(Error::NotPositiveDefinite);
    }
    let decay = (1.0 + 2.0 * gamma).min(1.0);
    let v_lo = -(60.0 / decay).min(20_000.0);
    let v_mid = -8.0;
    let v_hi = 745f64.ln();

    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let entry = |v: f64| {
                let weight = (v - v.exp()).exp();
                if weight == 0.0 {
                    return 0.0;
                }
                let x = params.mu + params.sigma * quantile_from_loglog(v, gamma);
                match log_density_derivatives(x, params) {
                    Some((_, h)) => -h[i][j] * weight,
                    None => 0.0,
                }
            };
            let tail_panels = (((v_mid - v_lo) / 2.0).ceil() as usize).max(1);
            let bulk = gauss_legendre_composite(entry, v_mid, v_hi, 60, 16);
            let tail = gauss_legendre_composite(entry, v_lo, v_mid, tail_panels, 16);
            out[i][j] = bulk + tail;
            out[j][i] = out[i][j];
        }
    }
    if Matrix3::from(out).cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(out)
}

/// Inverse of [`expected_information`].
pub fn expected_information_inverse(params: &GevParams) -> Result<[[f64; 3]; 3]> {
    let i = expected_information(params)?;
    Matrix3::from(i)
        .cholesky()
        .map(|c| to_array(&c.inverse()))
        .ok_or(Error::NotPositiveDefinite)
}
