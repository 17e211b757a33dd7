//! The generalized extreme value family.
//!
//! Standard form `G_γ(z) = exp(-(1 + γz)^{-1/γ})` on `1 + γz > 0`, with the Gumbel
//! limit `exp(-exp(-z))` at `γ = 0`. Every function switches to a Taylor expansion in
//! `γ` when `|γ| < SMALL_SHAPE` so the `γ → 0` limit is continuous to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this `|γ|` the closed forms are replaced by second-order series in `γ`.
pub const SMALL_SHAPE: f64 = 1e-6;

/// Below this `|γ z|` the Hessian helpers use a power series for `log(1+γz)/γ`.
const SERIES_GZ: f64 = 1e-2;

/// GEV parameters `(γ, μ, σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub gamma: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// Support `(lower, upper)` of a GEV law; infinite ends are `±inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportInfo {
    pub lower: f64,
    pub upper: f64,
}

impl GevParams {
    pub fn new(gamma: f64, mu: f64, sigma: f64) -> Result<Self> {
        if !(gamma.is_finite() && mu.is_finite() && sigma.is_finite()) {
            return Err(Error::InvalidArgument("GEV parameters must be finite".into()));
        }
        if sigma <= 0.0 {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {sigma}")));
        }
        Ok(Self { gamma, mu, sigma })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.gamma, self.mu, self.sigma]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self { gamma: a[0], mu: a[1], sigma: a[2] }
    }

    pub fn support(&self) -> SupportInfo {
        let end = self.mu - self.sigma / self.gamma;
        if self.gamma > 0.0 {
            SupportInfo { lower: end, upper: f64::INFINITY }
        } else if self.gamma < 0.0 {
            SupportInfo { lower: f64::NEG_INFINITY, upper: end }
        } else {
            SupportInfo { lower: f64::NEG_INFINITY, upper: f64::INFINITY }
        }
    }
}

/// `log(1 + γz) / γ`, equal to `z` at `γ = 0`. Caller guarantees `1 + γz > 0`.
fn log1p_ratio(z: f64, gamma: f64) -> f64 {
    if gamma.abs() < SMALL_SHAPE {
        z - gamma * z * z / 2.0 + gamma * gamma * z * z * z / 3.0
    } else {
        (gamma * z).ln_1p() / gamma
    }
}

/// Standard GEV distribution function `G_γ(z)`.
pub fn gev_cdf(z: f64, gamma: f64) -> Result<f64> {
    if z.is_nan() || gamma.is_nan() {
        return Err(Error::InvalidArgument("NaN input to gev_cdf".into()));
    }
    if gamma != 0.0 && 1.0 + gamma * z <= 0.0 {
        return Ok(if gamma > 0.0 { 0.0 } else { 1.0 });
    }
    let a = log1p_ratio(z, gamma);
    Ok((-(-a).exp()).exp())
}

/// Log-density of `G_ϑ` at `x`; `-inf` outside the support.
pub fn gev_log_density(x: f64, params: &GevParams) -> f64 {
    let z = (x - params.mu) / params.sigma;
    std_log_density(z, params.gamma) - params.sigma.ln()
}

/// Log-density of the standard law `G_γ` at `z`.
pub fn std_log_density(z: f64, gamma: f64) -> f64 {
    if z.is_nan() {
        return f64::NEG_INFINITY;
    }
    if gamma != 0.0 && 1.0 + gamma * z <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let a = log1p_ratio(z, gamma);
    -(1.0 + gamma) * a - (-a).exp()
}

fn check_prob(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("probability must lie in (0,1), got {p}")))
    }
}

/// Standard GEV quantile `Q_γ(p) = ((-log p)^{-γ} - 1)/γ`.
pub fn gev_quantile(p: f64, gamma: f64) -> Result<f64> {
    check_prob(p)?;
    let ell = (-p.ln()).ln();
    Ok(quantile_from_loglog(ell, gamma))
}

/// `Q_γ` expressed through `ℓ = log(-log p)`.
pub(crate) fn quantile_from_loglog(ell: f64, gamma: f64) -> f64 {
    if gamma.abs() < SMALL_SHAPE {
        -ell + gamma * ell * ell / 2.0 - gamma * gamma * ell * ell * ell / 6.0
    } else {
        (-gamma * ell).exp_m1() / gamma
    }
}

/// `∂Q_γ(p)/∂γ`.
pub fn gev_quantile_dgamma(p: f64, gamma: f64) -> Result<f64> {
    check_prob(p)?;
    let ell = (-p.ln()).ln();
    Ok(dquantile_from_loglog(ell, gamma))
}

pub(crate) fn dquantile_from_loglog(ell: f64, gamma: f64) -> f64 {
    if gamma.abs() < SMALL_SHAPE {
        let e2 = ell * ell;
        e2 / 2.0 - gamma * e2 * ell / 3.0 + gamma * gamma * e2 * e2 / 8.0
    } else {
        let x = -gamma * ell;
        -ell * x.exp() / gamma - x.exp_m1() / (gamma * gamma)
    }
}

/// `μ + σ Q_γ(p)`.
pub fn gev_model_quantile(p: f64, params: &GevParams) -> Result<f64> {
    Ok(params.mu + params.sigma * gev_quantile(p, params.gamma)?)
}

/// First and second derivatives of `log(1+γz)/γ` in `γ`: `(B, ∂B/∂γ, ∂²B/∂γ²)`.
fn ratio_and_shape_derivs(z: f64, gamma: f64, y: f64) -> (f64, f64, f64) {
    if (gamma * z).abs() < SERIES_GZ {
        // B = Σ (-1)^{j+1} γ^{j-1} z^j / j
        let (mut b, mut b1, mut b2) = (0.0, 0.0, 0.0);
        let mut zj = z;
        for j in 1..=14 {
            let jf = j as f64;
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            b += sign * gamma.powi(j - 1) * zj / jf;
            if j >= 2 {
                b1 += sign * (jf - 1.0) * gamma.powi(j - 2) * zj / jf;
            }
            if j >= 3 {
                b2 += sign * (jf - 1.0) * (jf - 2.0) * gamma.powi(j - 3) * zj / jf;
            }
            zj *= z;
        }
        (b, b1, b2)
    } else {
        let a = y.ln();
        let g2 = gamma * gamma;
        let b = a / gamma;
        let b1 = z / (gamma * y) - a / g2;
        let b2 = -2.0 * z / (g2 * y) - z * z / (gamma * y * y) + 2.0 * a / (g2 * gamma);
        (b, b1, b2)
    }
}

/// Gradient and Hessian of `ℓ_ϑ(x) = log g_ϑ(x)` with respect to `(γ, μ, σ)`.
///
/// Returns `None` outside the support.
pub fn log_density_derivatives(x: f64, params: &GevParams) -> Option<([f64; 3], [[f64; 3]; 3])> {
    let GevParams { gamma, sigma, .. } = *params;
    let z = (x - params.mu) / sigma;
    let y = 1.0 + gamma * z;
    if !(y > 0.0) {
        return None;
    }
    let (b, b_g, b_gg) = ratio_and_shape_derivs(z, gamma, y);
    let t = (-b).exp();

    // h(γ, z) = log g_γ(z) and its partials.
    let h_z = (t - gamma - 1.0) / y;
    let h_zz = (1.0 + gamma) * (gamma - t) / (y * y);
    let h_g = -z / y - (1.0 - t) * b_g;
    let h_gz = -1.0 / (y * y) - t * b_g / y + (1.0 - t) * z / (y * y);
    let h_gg = z * z / (y * y) - t * b_g * b_g - (1.0 - t) * b_gg;

    let s2 = sigma * sigma;
    let grad = [h_g, -h_z / sigma, -1.0 / sigma - z * h_z / sigma];
    let d_gm = -h_gz / sigma;
    let d_gs = -z * h_gz / sigma;
    let d_mm = h_zz / s2;
    let d_ms = (h_z + z * h_zz) / s2;
    let d_ss = (1.0 + 2.0 * z * h_z + z * z * h_zz) / s2;
    let hess = [[h_gg, d_gm, d_gs], [d_gm, d_mm, d_ms], [d_gs, d_ms, d_ss]];
    Some((grad, hess))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    // Bisection on the cdf, independent of the closed-form quantile.
    fn quantile_by_root(p: f64, gamma: f64) -> f64 {
        let (mut lo, mut hi) = (-1e3, 1e6);
        if gamma > 0.0 {
            lo = -1.0 / gamma + 1e-12;
        }
        if gamma < 0.0 {
            hi = -1.0 / gamma - 1e-12;
        }
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if gev_cdf(mid, gamma).unwrap() < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn cdf_examples() {
        assert!(close(gev_cdf(0.0, 0.0).unwrap(), (-1.0f64).exp(), 1e-15));
        assert!(close(gev_cdf(1.0, 1.0).unwrap(), (-0.5f64).exp(), 1e-15));
        assert_eq!(gev_cdf(2.5, -0.5).unwrap(), 1.0);
        assert_eq!(gev_cdf(-2.0, 0.5).unwrap(), 0.0);
        assert!(gev_cdf(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn log_density_examples() {
        let p0 = GevParams::new(0.0, 0.0, 1.0).unwrap();
        assert!(close(gev_log_density(0.0, &p0), -1.0, 1e-15));
        let p1 = GevParams::new(1.0, 0.0, 1.0).unwrap();
        assert_eq!(gev_log_density(-2.0, &p1), f64::NEG_INFINITY);
        assert!(close(gev_log_density(1.0, &p1), -0.5 - 4f64.ln(), 1e-14));
    }

    #[test]
    fn quantile_examples() {
        for g in [-0.4, 0.0, 0.3, 2.0] {
            assert!(gev_quantile((-1.0f64).exp(), g).unwrap().abs() < 1e-15);
            assert!(gev_quantile_dgamma((-1.0f64).exp(), g).unwrap().abs() < 1e-15);
        }
        assert!(close(gev_quantile(0.9, 0.0).unwrap(), 2.250367, 1e-6));
        let oracle = quantile_by_root(0.9, 1.0);
        assert!(close(oracle, 8.491, 1e-3));
        assert!(close(gev_quantile(0.9, 1.0).unwrap(), oracle, 1e-9));
        assert!(gev_quantile(0.0, 0.1).is_err());
        assert!(gev_quantile(1.0, 0.1).is_err());
        assert!(gev_quantile_dgamma(1.5, 0.1).is_err());
    }

    #[test]
    fn dgamma_examples() {
        assert!(close(gev_quantile_dgamma((-E).exp(), 0.0).unwrap(), 0.5, 1e-14));
        let h = 1e-5;
        let fd = (gev_quantile(0.9, 0.3 + h).unwrap() - gev_quantile(0.9, 0.3 - h).unwrap()) / (2.0 * h);
        assert!(close(gev_quantile_dgamma(0.9, 0.3).unwrap(), fd, 1e-6));
    }

    #[test]
    fn model_quantile_examples() {
        let p = GevParams::new(0.4, 3.0, 2.0).unwrap();
        assert!(close(gev_model_quantile((-1.0f64).exp(), &p).unwrap(), 3.0, 1e-14));
        let p = GevParams::new(0.2, 1.0, 0.5).unwrap();
        let oracle = 1.0 + 0.5 * quantile_by_root(0.99, 0.2);
        assert!(close(gev_model_quantile(0.99, &p).unwrap(), oracle, 1e-8));
    }

    #[test]
    fn support_endpoints() {
        let s = GevParams::new(0.5, 1.0, 2.0).unwrap().support();
        assert_eq!((s.lower, s.upper), (-3.0, f64::INFINITY));
        let s = GevParams::new(-0.5, 1.0, 2.0).unwrap().support();
        assert_eq!((s.lower, s.upper), (f64::NEG_INFINITY, 5.0));
        assert!(GevParams::new(0.1, 0.0, 0.0).is_err());
    }

    fn fd_derivs(x: f64, p: &GevParams) -> ([f64; 3], [[f64; 3]; 3]) {
        let f = |a: [f64; 3]| gev_log_density(x, &GevParams::from_array(a));
        let base = p.as_array();
        let h = [1e-4, 1e-4 * p.sigma, 1e-4 * p.sigma];
        let mut g = [0.0; 3];
        let mut hs = [[0.0; 3]; 3];
        for i in 0..3 {
            let mut a = base;
            let mut b = base;
            a[i] += h[i];
            b[i] -= h[i];
            g[i] = (f(a) - f(b)) / (2.0 * h[i]);
            for j in 0..3 {
                let mut pp = base;
                let mut pm = base;
                let mut mp = base;
                let mut mm = base;
                pp[i] += h[i];
                pp[j] += h[j];
                pm[i] += h[i];
                pm[j] -= h[j];
                mp[i] -= h[i];
                mp[j] += h[j];
                mm[i] -= h[i];
                mm[j] -= h[j];
                hs[i][j] = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h[i] * h[j]);
            }
        }
        (g, hs)
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        for &(g, x) in &[(0.2, 0.7), (-0.3, 0.4), (0.0, 1.5), (1e-8, -0.8), (0.005, 2.0), (1.5, 3.0), (-0.1, -2.0)] {
            let p = GevParams::new(g, 0.1, 1.3).unwrap();
            let (ga, ha) = log_density_derivatives(x, &p).unwrap();
            let (gf, hf) = fd_derivs(x, &p);
            for i in 0..3 {
                assert!(close(ga[i], gf[i], 1e-6), "grad {i} at γ={g}: {} vs {}", ga[i], gf[i]);
                for j in 0..3 {
                    assert!(close(ha[i][j], hf[i][j], 1e-4), "hess {i}{j} at γ={g}: {} vs {}", ha[i][j], hf[i][j]);
                }
            }
        }
        let p = GevParams::new(1.0, 0.0, 1.0).unwrap();
        assert!(log_density_derivatives(-2.0, &p).is_none());
    }

    #[test]
    fn monotone_quantile() {
        for g in [-0.45, -0.1, 0.0, 0.7, 3.0] {
            let mut prev = f64::NEG_INFINITY;
            for i in 1..200 {
                let q = gev_quantile(i as f64 / 200.0, g).unwrap();
                assert!(q > prev);
                prev = q;
            }
        }
    }
}
