//! Data-dependent priors on the GEV parameters.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::freq::mle::sum_loglik;
use crate::gev::GevParams;

/// Prior on the shape, truncated to `(-1/2, shape_upper)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ShapePrior {
    StudentT { df: f64, loc: f64, scale: f64 },
    Uniform,
}

/// Base density `π_loc` for the standardized location `(μ - μ̂)/σ̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LocationBase {
    Gaussian { sd: f64 },
}

/// Base density `π_sc` for the standardized scale `σ/σ̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScaleBase {
    Exponential { rate: f64 },
}

/// `π(ϑ) = π_sh(γ) · π_loc((μ-μ̂)/σ̂)/σ̂ · π_sc(σ/σ̂)/σ̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub shape: ShapePrior,
    pub location: LocationBase,
    pub scale: ScaleBase,
    pub shape_upper: f64,
    /// `(μ̂, σ̂)`; required before evaluation.
    pub anchor: Option<(f64, f64)>,
}

impl PriorSpec {
    /// Student-t(3, 0, 1) shape prior with Gaussian and unit-exponential bases.
    pub fn default_for(shape_upper: f64) -> Self {
        Self {
            shape: ShapePrior::StudentT { df: 3.0, loc: 0.0, scale: 1.0 },
            location: LocationBase::Gaussian { sd: 1.0 },
            scale: ScaleBase::Exponential { rate: 1.0 },
            shape_upper,
            anchor: None,
        }
    }

    pub fn anchored(mut self, mu_hat: f64, sigma_hat: f64) -> Self {
        self.anchor = Some((mu_hat, sigma_hat));
        self
    }

    /// Validates the prior and precomputes its normalizing constants.
    pub fn compile(&self) -> Result<CompiledPrior> {
        let (mu_hat, sigma_hat) = self
            .anchor
            .ok_or_else(|| Error::InvalidArgument("prior is not anchored at (μ̂, σ̂)".into()))?;
        if !(mu_hat.is_finite() && sigma_hat.is_finite() && sigma_hat > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid prior anchor ({mu_hat}, {sigma_hat})")));
        }
        if !(self.shape_upper > -0.5) {
            return Err(Error::InvalidArgument("empty shape range".into()));
        }
        let (lo, hi) = (-0.5, self.shape_upper);
        let shape = match self.shape {
            ShapePrior::StudentT { df, loc, scale } => {
                let t = StudentsT::new(loc, scale, df).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                let mass = t.cdf(hi) - t.cdf(lo);
                if !(mass > 0.0) {
                    return Err(Error::InvalidArgument("shape prior has no mass on the shape range".into()));
                }
                let log_norm = ln_gamma((df + 1.0) / 2.0)
                    - ln_gamma(df / 2.0)
                    - 0.5 * (df * std::f64::consts::PI).ln()
                    - scale.ln()
                    - mass.ln();
                CompiledShape::StudentT { df, loc, scale, log_norm }
            }
            ShapePrior::Uniform => CompiledShape::Uniform { log_width: (hi - lo).ln() },
        };
        let LocationBase::Gaussian { sd } = self.location;
        let ScaleBase::Exponential { rate } = self.scale;
        if !(sd > 0.0 && rate > 0.0) {
            return Err(Error::InvalidArgument("prior base parameters must be positive".into()));
        }
        Ok(CompiledPrior { shape, lo, hi, mu_hat, sigma_hat, loc_sd: sd, scale_rate: rate })
    }
}

#[derive(Debug, Clone)]
enum CompiledShape {
    StudentT { df: f64, loc: f64, scale: f64, log_norm: f64 },
    Uniform { log_width: f64 },
}

/// A validated prior, cheap to evaluate repeatedly.
#[derive(Debug, Clone)]
pub struct CompiledPrior {
    shape: CompiledShape,
    lo: f64,
    hi: f64,
    mu_hat: f64,
    sigma_hat: f64,
    loc_sd: f64,
    scale_rate: f64,
}

impl CompiledPrior {
    pub fn shape_range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn log_shape(&self, gamma: f64) -> f64 {
        if !(gamma > self.lo && gamma < self.hi) {
            return f64::NEG_INFINITY;
        }
        match &self.shape {
            CompiledShape::StudentT { df, loc, scale, log_norm } => {
                let z = (gamma - loc) / scale;
                log_norm - 0.5 * (df + 1.0) * (z * z / df).ln_1p()
            }
            CompiledShape::Uniform { log_width } => -log_width,
        }
    }

    pub fn log_location(&self, mu: f64) -> f64 {
        let z = (mu - self.mu_hat) / (self.sigma_hat * self.loc_sd);
        -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln() - (self.sigma_hat * self.loc_sd).ln()
    }

    pub fn log_scale(&self, sigma: f64) -> f64 {
        if !(sigma > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.scale_rate.ln() - self.scale_rate * sigma / self.sigma_hat - self.sigma_hat.ln()
    }

    pub fn log_density(&self, p: &GevParams) -> f64 {
        let s = self.log_shape(p.gamma);
        if s == f64::NEG_INFINITY {
            return s;
        }
        s + self.log_location(p.mu) + self.log_scale(p.sigma)
    }
}

/// `log π(ϑ)`; `-inf` outside `Θ_n`.
pub fn log_prior(params: &GevParams, spec: &PriorSpec) -> Result<f64> {
    Ok(spec.compile()?.log_density(params))
}

/// `k·ℒ_n(ϑ) + log π(ϑ)`.
pub fn log_posterior_unnorm(params: &GevParams, maxima: &[f64], spec: &PriorSpec) -> Result<f64> {
    let prior = spec.compile()?;
    Ok(log_posterior_with(&prior, params, maxima))
}

pub(crate) fn log_posterior_with(prior: &CompiledPrior, params: &GevParams, maxima: &[f64]) -> f64 {
    let lp = prior.log_density(params);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    let ll = sum_loglik(maxima, params);
    if ll.is_nan() {
        f64::NEG_INFINITY
    } else {
        ll + lp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> PriorSpec {
        PriorSpec::default_for(10f64.sqrt()).anchored(2.0, 3.0)
    }

    #[test]
    fn truncation_and_anchor() {
        let s = spec();
        assert_eq!(log_prior(&GevParams::new(-0.6, 0.0, 1.0).unwrap(), &s).unwrap(), f64::NEG_INFINITY);
        assert_eq!(log_prior(&GevParams::new(3.2, 0.0, 1.0).unwrap(), &s).unwrap(), f64::NEG_INFINITY);
        let unanchored = PriorSpec::default_for(3.0);
        assert!(log_prior(&GevParams::new(0.0, 0.0, 1.0).unwrap(), &unanchored).is_err());
    }

    #[test]
    fn student_t_density_matches_reference() {
        use statrs::distribution::Continuous;
        let s = PriorSpec::default_for(2.0).anchored(0.0, 1.0);
        let prior = s.compile().unwrap();
        let t = StudentsT::new(0.0, 1.0, 3.0).unwrap();
        let mass = t.cdf(2.0) - t.cdf(-0.5);
        for g in [-0.4, 0.0, 0.3, 1.9] {
            assert!((prior.log_shape(g) - (t.ln_pdf(g) - mass.ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn rescaling_identity() {
        // at (μ̂, σ̂) the location and scale factors contribute -2 log σ̂ plus constants
        let a = PriorSpec::default_for(3.0).anchored(0.0, 1.0).compile().unwrap();
        let b = PriorSpec::default_for(3.0).anchored(5.0, 4.0).compile().unwrap();
        let la = a.log_location(0.0) + a.log_scale(1.0);
        let lb = b.log_location(5.0) + b.log_scale(4.0);
        assert!((lb - (la - 2.0 * 4f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn posterior_differences_follow_likelihood_under_flat_prior() {
        let x = [0.3, 1.2, -0.4, 2.5, 0.9, 0.1];
        let mut s = spec();
        s.shape = ShapePrior::Uniform;
        let prior = s.compile().unwrap();
        let p1 = GevParams::new(0.1, 2.0, 3.0).unwrap();
        let p2 = GevParams::new(0.2, 2.0, 3.0).unwrap();
        let d = log_posterior_with(&prior, &p1, &x) - log_posterior_with(&prior, &p2, &x);
        let expect = 6.0 * (crate::freq::gev_loglik(&x, &p1) - crate::freq::gev_loglik(&x, &p2));
        assert!((d - expect).abs() < 1e-10);
    }
}
