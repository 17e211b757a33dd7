//! Maximum likelihood for the GEV law on block maxima over the restricted space
//! `Θ_n = (-1/2, k^q) × ℝ × (0, ∞)`.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;

use super::optim::{nelder_mead, NelderMeadOptions};
use crate::error::{Error, Result};
use crate::gev::{std_log_density, GevParams};

/// Default restriction exponent: `γ < √k`.
pub const DEFAULT_Q: f64 = 0.5;

/// Mean log-likelihood `ℒ_n(ϑ) = k⁻¹ Σ ℓ_ϑ(M_i)`; `-inf` if any maximum is out of support.
pub fn gev_loglik(maxima: &[f64], params: &GevParams) -> f64 {
    sum_loglik(maxima, params) / maxima.len() as f64
}

/// `k·ℒ_n(ϑ)`.
pub(crate) fn sum_loglik(maxima: &[f64], params: &GevParams) -> f64 {
    if !(params.sigma > 0.0) {
        return f64::NEG_INFINITY;
    }
    let inv = 1.0 / params.sigma;
    let mut s = 0.0;
    for &x in maxima {
        let v = std_log_density((x - params.mu) * inv, params.gamma);
        if v == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        s += v;
    }
    s - maxima.len() as f64 * params.sigma.ln()
}

/// Result of [`fit_gev_mle`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GevFit {
    pub params: GevParams,
    /// `k·ℒ_n(ϑ̂)`.
    pub loglik: f64,
    /// `-k 𝒥_n(ϑ̂)`, the negative Hessian of the summed log-likelihood.
    pub observed_info: [[f64; 3]; 3],
    /// `Î_n⁻¹ = (-A_n 𝒥_n(ϑ̂) A_n)⁻¹`, `A_n = diag(1, σ̂, σ̂)`; `None` when the Hessian is
    /// not negative definite.
    pub info_inv_standardized: Option<[[f64; 3]; 3]>,
    pub k: usize,
    pub q: f64,
    pub converged: bool,
}

impl GevFit {
    /// Upper bound `k^q` on the shape.
    pub fn shape_upper(&self) -> f64 {
        (self.k as f64).powf(self.q)
    }

    /// `(-k 𝒥_n(ϑ̂))⁻¹`, the covariance of the Gaussian approximation to `ϑ̂`.
    pub fn covariance(&self) -> Option<[[f64; 3]; 3]> {
        let h = Matrix3::from(self.observed_info).transpose();
        h.cholesky().map(|c| to_array(&c.inverse()))
    }

    /// Standard errors `sqrt(diag((-k 𝒥_n)⁻¹))`.
    pub fn std_errors(&self) -> Option<[f64; 3]> {
        self.covariance().map(|c| [c[0][0].sqrt(), c[1][1].sqrt(), c[2][2].sqrt()])
    }

    pub fn is_regular(&self) -> bool {
        self.info_inv_standardized.is_some()
    }
}

pub(crate) fn to_array(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    let mut a = [[0.0; 3]; 3];
    for (i, row) in a.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
    a
}

/// Probability-weighted-moment estimates (Hosking, Wallis & Wood), in `(γ, μ, σ)`.
pub fn pwm_estimate(maxima: &[f64]) -> Option<GevParams> {
    let n = maxima.len();
    if n < 3 {
        return None;
    }
    let mut x = maxima.to_vec();
    x.sort_by(f64::total_cmp);
    let nf = n as f64;
    let b0 = x.iter().sum::<f64>() / nf;
    let b1 = x.iter().enumerate().map(|(i, v)| i as f64 / (nf - 1.0) * v).sum::<f64>() / nf;
    let b2 = x
        .iter()
        .enumerate()
        .map(|(i, v)| (i as f64 * (i as f64 - 1.0)) / ((nf - 1.0) * (nf - 2.0)) * v)
        .sum::<f64>()
        / nf;
    let c = (2.0 * b1 - b0) / (3.0 * b2 - b0) - 2f64.ln() / 3f64.ln();
    let kh = 7.8590 * c + 2.9554 * c * c;
    if !kh.is_finite() {
        return None;
    }
    let (sigma, mu) = if kh.abs() < 1e-6 {
        let sigma = (2.0 * b1 - b0) / 2f64.ln();
        (sigma, b0 - 0.5772156649 * sigma)
    } else {
        let g = gamma_fn(1.0 + kh);
        let sigma = (2.0 * b1 - b0) * kh / (g * (1.0 - 2f64.powf(-kh)));
        (sigma, b0 + sigma * (g - 1.0) / kh)
    };
    GevParams::new(-kh, mu, sigma).ok()
}

struct Reparam {
    lower: f64,
    width: f64,
}

impl Reparam {
    fn new(upper: f64) -> Self {
        Self { lower: -0.5, width: upper + 0.5 }
    }

    fn to_params(&self, u: &[f64; 3]) -> GevParams {
        let gamma = self.lower + self.width / (1.0 + (-u[0]).exp());
        GevParams { gamma, mu: u[1], sigma: u[2].exp() }
    }

    fn from_params(&self, p: &GevParams) -> [f64; 3] {
        let r = ((p.gamma - self.lower) / self.width).clamp(1e-12, 1.0 - 1e-12);
        [(r / (1.0 - r)).ln(), p.mu, p.sigma.ln()]
    }
}

/// Pushes `σ` up until every maximum lies inside the support.
fn make_feasible(maxima: &[f64], mut p: GevParams) -> GevParams {
    for _ in 0..60 {
        if sum_loglik(maxima, &p).is_finite() {
            return p;
        }
        p.sigma *= 1.5;
    }
    p
}

/// Fits the GEV law to `maxima` by maximum likelihood over `Θ_n` with `γ < k^q`.
///
/// The data are standardized internally, so the fit is location–scale equivariant up to
/// rounding. Runs a multi-start simplex search from the probability-weighted-moment
/// estimate, a Gumbel moment start and four perturbations of the PWM start.
pub fn fit_gev_mle(maxima: &[f64], q: f64) -> Result<GevFit> {
    let k = maxima.len();
    if maxima.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("block maxima must be finite".into()));
    }
    let mut sorted = maxima.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 distinct block maxima, got {}",
            sorted.len()
        )));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!("restriction exponent q must lie in (0,1), got {q}")));
    }

    let center = crate::stats::median(maxima);
    // divide by the largest deviation first so the variance cannot overflow
    let spread = maxima.iter().map(|x| (x - center).abs()).fold(0.0, f64::max);
    let unit: Vec<f64> = maxima.iter().map(|x| (x - center) / spread).collect();
    let scale = spread * crate::stats::sd(&unit);
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidArgument("block maxima span too wide a range to standardize".into()));
    }
    let z: Vec<f64> = maxima.iter().map(|x| (x - center) / scale).collect();

    let upper = (k as f64).powf(q);
    let rp = Reparam::new(upper);
    let clamp_shape = |g: f64| g.clamp(-0.45, (upper - 0.05).min(2.0));

    let mut starts = Vec::new();
    let gumbel_sigma = 6f64.sqrt() / std::f64::consts::PI;
    let mean_z = crate::stats::mean(&z);
    starts.push(GevParams { gamma: 0.0, mu: mean_z - 0.5772156649 * gumbel_sigma, sigma: gumbel_sigma });
    if let Some(p) = pwm_estimate(&z) {
        let p = GevParams { gamma: clamp_shape(p.gamma), ..p };
        starts.insert(0, p);
        for (dg, fs) in [(0.25, 1.2), (-0.2, 0.8), (0.5, 1.5), (-0.1, 1.0)] {
            starts.push(GevParams { gamma: clamp_shape(p.gamma + dg), mu: p.mu, sigma: p.sigma * fs });
        }
    }

    // the logistic map saturates in floating point, so keep the search off the flat tails
    let objective = |u: &[f64; 3]| {
        if u[0].abs() > 30.0 {
            return f64::INFINITY;
        }
        -sum_loglik(&z, &rp.to_params(u))
    };
    let opts = NelderMeadOptions::default();
    let mut best: Option<super::optim::Minimum<3>> = None;
    for s in starts {
        let s = make_feasible(&z, s);
        if !sum_loglik(&z, &s).is_finite() {
            continue;
        }
        let u0 = rp.from_params(&s);
        let mut m = nelder_mead(objective, u0, [0.3, 0.3, 0.3], opts);
        // restart once from the reported optimum to escape premature collapse
        let m2 = nelder_mead(objective, m.x, [0.05, 0.05, 0.05], opts);
        if m2.f <= m.f {
            m = m2;
        }
        if best.map_or(true, |b| m.f < b.f) {
            best = Some(m);
        }
    }
    let best = best.ok_or(Error::NonConvergence { best: [f64::NAN; 3], best_loglik: f64::NEG_INFINITY })?;
    let std_params = rp.to_params(&best.x);
    let params = GevParams { gamma: std_params.gamma, mu: center + scale * std_params.mu, sigma: scale * std_params.sigma };
    let loglik = sum_loglik(maxima, &params);
    if !best.converged || !(params.mu.is_finite() && params.sigma.is_finite() && loglik.is_finite()) {
        return Err(Error::NonConvergence { best: params.as_array(), best_loglik: loglik });
    }
    assert!(params.gamma > -0.5 && params.gamma < upper, "shape estimate left Θ_n");

    let hess = numerical_hessian(maxima, &params);
    let observed_info = hess.map(|row| row.map(|h| -h));
    let info_inv_standardized = standardized_inverse_info(&observed_info, params.sigma, k);

    Ok(GevFit { params, loglik, observed_info, info_inv_standardized, k, q, converged: true })
}

/// `(A (observed_info / k) A)⁻¹` with `A = diag(1, σ, σ)`, if positive definite.
pub(crate) fn standardized_inverse_info(observed_info: &[[f64; 3]; 3], sigma: f64, k: usize) -> Option<[[f64; 3]; 3]> {
    let a = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, sigma, sigma));
    let h = Matrix3::from(*observed_info).transpose() / k as f64;
    let std = a * h * a;
    std.cholesky().map(|c| to_array(&c.inverse()))
}

/// Central finite-difference Hessian of `k·ℒ_n` at `params`.
///
/// Steps are `ε^{1/3}` times a per-coordinate scale (1 for `γ`, `σ` for `μ` and `σ`) and
/// are shrunk whenever a stencil point leaves the support.
pub fn numerical_hessian(maxima: &[f64], params: &GevParams) -> [[f64; 3]; 3] {
    let base = params.as_array();
    let f = |a: [f64; 3]| {
        if a[2] <= 0.0 {
            return f64::NEG_INFINITY;
        }
        sum_loglik(maxima, &GevParams::from_array(a))
    };
    let eps3 = f64::EPSILON.cbrt();
    let scale = [base[0].abs().max(1.0), params.sigma, params.sigma];
    let mut h = [0.0; 3];
    for i in 0..3 {
        h[i] = eps3 * scale[i];
    }
    let mut out = [[f64::NAN; 3]; 3];
    let f0 = f(base);
    for i in 0..3 {
        for j in i..3 {
            let (mut hi, mut hj) = (h[i], h[j]);
            let mut value = f64::NAN;
            for _ in 0..8 {
                let shifted = |di: f64, dj: f64| {
                    let mut a = base;
                    a[i] += di;
                    a[j] += dj;
                    f(a)
                };
                let v = if i == j {
                    (shifted(hi, 0.0) - 2.0 * f0 + shifted(-hi, 0.0)) / (hi * hi)
                } else {
                    (shifted(hi, hj) - shifted(hi, -hj) - shifted(-hi, hj) + shifted(-hi, -hj)) / (4.0 * hi * hj)
                };
                if v.is_finite() {
                    value = v;
                    break;
                }
                hi /= 4.0;
                hj /= 4.0;
            }
            out[i][j] = value;
            out[j][i] = value;
        }
    }
    out
}
