//! Posterior of the extremal index under the exponential pseudo-likelihood.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mcmc::csv_err;
use crate::blocks::PseudoObs;
use crate::error::{Error, Result};
use crate::freq::ThetaFit;
use crate::quad::adaptive_simpson;

const GRID_NODES: usize = 4096;
const EDGE: f64 = 1e-10;
const CELL_TOL: f64 = 1e-14;
const SIMPSON_DEPTH: u32 = 40;

/// Continuous part `π̃` of the extremal-index prior on `(0, 1)`; normalized internally.
#[derive(Clone)]
pub struct ThetaDensity(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl ThetaDensity {
    pub fn uniform() -> Self {
        Self(Arc::new(|_| 1.0))
    }

    /// Any nonnegative integrable function on `(0, 1)`.
    pub fn from_fn<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self(Arc::new(f))
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

impl fmt::Debug for ThetaDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ThetaDensity(..)")
    }
}

/// Mixture prior `(1-p) π̃(θ) dθ + p δ₁`.
#[derive(Debug, Clone)]
pub struct ThetaPriorSpec {
    pub continuous: ThetaDensity,
    pub atom_mass: f64,
}

impl Default for ThetaPriorSpec {
    fn default() -> Self {
        Self { continuous: ThetaDensity::uniform(), atom_mass: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaPosteriorMeta {
    pub atom_weight: f64,
    /// Log of the normalizing constant of the unnormalized posterior.
    pub log_normalizer: f64,
    pub adjusted: bool,
    pub theta_hat: f64,
    pub sigma_tilde: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Posterior of `θ`, optionally with the curvature adjustment
/// `g(θ) = θ̂ + (θ - θ̂)/(θ̂σ̃)` applied inside the likelihood.
#[derive(Debug, Clone)]
pub struct ThetaPosterior {
    pub grid: Vec<f64>,
    /// Normalized continuous density at the grid nodes.
    pub density: Vec<f64>,
    /// Continuous-part cdf at the grid nodes; ends at `1 - atom_weight`.
    pub cdf_grid: Vec<f64>,
    pub atom_weight: f64,
    pub log_normalizer: f64,
    pub adjusted: bool,
    pub theta_hat: f64,
    pub sigma_tilde: f64,
    mean: f64,
    sd: f64,
    kernel: Kernel,
}

#[derive(Debug, Clone)]
struct Kernel {
    k: f64,
    sum_y: f64,
    slope: f64,
    theta_hat: f64,
    log_cont_weight: f64,
    log_prior_norm: f64,
    prior: ThetaDensity,
    /// Subtracted from every log density before exponentiation.
    shift: f64,
    /// Unnormalized continuous mass after the shift.
    total: f64,
}

impl Kernel {
    fn map(&self, t: f64) -> f64 {
        self.theta_hat + (t - self.theta_hat) * self.slope
    }

    fn loglik(&self, t: f64) -> f64 {
        if t <= 0.0 {
            f64::NEG_INFINITY
        } else {
            self.k * t.ln() - t * self.sum_y
        }
    }

    fn log_unnorm(&self, t: f64) -> f64 {
        let pi = self.prior.eval(t);
        if !(pi > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.loglik(self.map(t)) + self.log_cont_weight + pi.ln() - self.log_prior_norm
    }

    fn scaled(&self, t: f64) -> f64 {
        let v = self.log_unnorm(t) - self.shift;
        if v == f64::NEG_INFINITY {
            0.0
        } else {
            v.exp()
        }
    }
}

/// Builds the posterior from pseudo-observations. `fit` supplies `(θ̂, σ̃)` and is
/// required when `adjusted` is set.
pub fn theta_posterior(
    pseudo: &PseudoObs,
    prior: &ThetaPriorSpec,
    adjusted: bool,
    fit: Option<&ThetaFit>,
) -> Result<ThetaPosterior> {
    let p = prior.atom_mass;
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("atom mass must lie in [0,1), got {p}")));
    }
    if pseudo.k_tilde == 0 {
        return Err(Error::InvalidArgument("no pseudo-observations".into()));
    }
    let (theta_hat, sigma_tilde) = match fit {
        Some(f) => (f.theta_hat, f.sigma_tilde_sq.sqrt()),
        None if adjusted => return Err(Error::InvalidArgument("adjusted posterior needs an extremal-index fit".into())),
        None => (f64::NAN, f64::NAN),
    };
    let slope = if adjusted {
        let s = theta_hat * sigma_tilde;
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument("adjustment needs θ̂σ̃ > 0".into()));
        }
        1.0 / s
    } else {
        1.0
    };

    let log_prior_norm = {
        let cells = 64;
        let w = (1.0 - 2.0 * EDGE) / cells as f64;
        let z: f64 = (0..cells)
            .map(|i| {
                let a = EDGE + i as f64 * w;
                adaptive_simpson(|t| prior.continuous.eval(t), a, a + w, 1e-12, SIMPSON_DEPTH)
            })
            .sum();
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::InvalidArgument("continuous θ prior must have positive finite mass".into()));
        }
        z.ln()
    };

    let mut kernel = Kernel {
        k: pseudo.k_tilde as f64,
        sum_y: pseudo.sum(),
        slope,
        theta_hat: if adjusted { theta_hat } else { 0.0 },
        log_cont_weight: (1.0 - p).ln(),
        log_prior_norm,
        prior: prior.continuous.clone(),
        shift: 0.0,
        total: 0.0,
    };

    // g(θ) > 0 exactly when θ > θ̂ - θ̂²σ̃
    let lo = if adjusted { (theta_hat - theta_hat / slope).max(EDGE) } else { EDGE };
    let hi = 1.0 - EDGE;
    let log_atom = if p > 0.0 { p.ln() + kernel.loglik(kernel.map(1.0)) } else { f64::NEG_INFINITY };

    let grid: Vec<f64> = if lo < hi {
        (0..GRID_NODES).map(|i| lo + (hi - lo) * i as f64 / (GRID_NODES - 1) as f64).collect()
    } else {
        Vec::new()
    };
    let log_vals: Vec<f64> = grid.iter().map(|&t| kernel.log_unnorm(t)).collect();
    let shift = log_vals.iter().copied().chain(std::iter::once(log_atom)).fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::Numerical("θ posterior vanishes everywhere".into()));
    }
    kernel.shift = shift;

    let mut cum = Vec::with_capacity(grid.len());
    let (mut mass, mut m1, mut m2) = (0.0, 0.0, 0.0);
    if !grid.is_empty() {
        cum.push(0.0);
    }
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        mass += adaptive_simpson(|t| kernel.scaled(t), a, b, CELL_TOL, SIMPSON_DEPTH);
        m1 += adaptive_simpson(|t| t * kernel.scaled(t), a, b, CELL_TOL, SIMPSON_DEPTH);
        m2 += adaptive_simpson(|t| t * t * kernel.scaled(t), a, b, CELL_TOL, SIMPSON_DEPTH);
        cum.push(mass);
    }
    let atom = (log_atom - shift).exp();
    let total = mass + atom;
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Numerical("θ posterior normalizer is not finite".into()));
    }
    kernel.total = total;
    let atom_weight = atom / total;
    let mean = (m1 + atom) / total;
    let second = (m2 + atom) / total;
    let sd = (second - mean * mean).max(0.0).sqrt();

    Ok(ThetaPosterior {
        density: log_vals.iter().map(|v| (v - shift).exp() / total).collect(),
        cdf_grid: cum.iter().map(|c| c / total).collect(),
        grid,
        atom_weight,
        log_normalizer: shift + total.ln(),
        adjusted,
        theta_hat,
        sigma_tilde,
        mean,
        sd,
        kernel,
    })
}

impl ThetaPosterior {
    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }

    /// Normalized density of the continuous part at `θ ∈ (0, 1)`.
    pub fn density_at(&self, t: f64) -> f64 {
        if !(t > 0.0 && t < 1.0) {
            return 0.0;
        }
        self.kernel.scaled(t) / self.kernel.total
    }

    fn continuous_end(&self) -> f64 {
        self.cdf_grid.last().copied().unwrap_or(0.0)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t >= 1.0 {
            return 1.0;
        }
        if self.grid.is_empty() || t <= self.grid[0] {
            return 0.0;
        }
        let last = self.grid.len() - 1;
        if t >= self.grid[last] {
            return self.continuous_end();
        }
        let i = self.grid.partition_point(|&g| g <= t) - 1;
        let part = adaptive_simpson(|s| self.kernel.scaled(s), self.grid[i], t, CELL_TOL, SIMPSON_DEPTH);
        self.cdf_grid[i] + part / self.kernel.total
    }

    /// Smallest `θ` with `cdf(θ) ≥ u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if self.grid.is_empty() || u > self.continuous_end() {
            return 1.0;
        }
        let i = self.cell_of(u);
        let (mut a, mut b) = (self.grid[i], self.grid[i + 1]);
        for _ in 0..60 {
            let c = 0.5 * (a + b);
            if self.cdf(c) < u {
                a = c;
            } else {
                b = c;
            }
        }
        0.5 * (a + b)
    }

    fn cell_of(&self, u: f64) -> usize {
        let i = self.cdf_grid.partition_point(|&c| c < u);
        i.saturating_sub(1).min(self.grid.len() - 2)
    }

    /// Inverse-cdf draw, interpolating linearly within grid cells.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        if self.grid.len() < 2 || u >= self.continuous_end() {
            return 1.0;
        }
        let i = self.cell_of(u);
        let (c0, c1) = (self.cdf_grid[i], self.cdf_grid[i + 1]);
        let frac = if c1 > c0 { ((u - c0) / (c1 - c0)).clamp(0.0, 1.0) } else { 0.5 };
        self.grid[i] + frac * (self.grid[i + 1] - self.grid[i])
    }

    pub fn meta(&self) -> ThetaPosteriorMeta {
        ThetaPosteriorMeta {
            atom_weight: self.atom_weight,
            log_normalizer: self.log_normalizer,
            adjusted: self.adjusted,
            theta_hat: self.theta_hat,
            sigma_tilde: self.sigma_tilde,
            mean: self.mean,
            sd: self.sd,
        }
    }

    /// Writes `theta,density,cdf` rows for the grid.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["theta", "density", "cdf"]).map_err(csv_err)?;
        for ((t, d), c) in self.grid.iter().zip(&self.density).zip(&self.cdf_grid) {
            w.write_record([t.to_string(), d.to_string(), c.to_string()]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the grid to `path` and the atom weight and summary to `path` with a
    /// `.json` extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)?;
        let json = serde_json::to_string_pretty(&self.meta()).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(path.with_extension("json"), json)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pseudo(mean: f64, k: usize) -> PseudoObs {
        PseudoObs { y: vec![mean; k], m_tilde: 10, k_tilde: k }
    }

    fn fit(theta_hat: f64, sigma_tilde_sq: f64, p: &PseudoObs) -> ThetaFit {
        ThetaFit {
            theta_hat,
            sigma_tilde_sq,
            k_origins: 1,
            k_tilde: p.k_tilde,
            m_tilde: p.m_tilde,
            var_hat: theta_hat.powi(4) * sigma_tilde_sq / p.k_tilde as f64,
            pseudo: p.clone(),
        }
    }

    #[test]
    fn normalized_with_monotone_cdf() {
        let y = pseudo(1.6, 80);
        let post = theta_posterior(&y, &ThetaPriorSpec::default(), false, None).unwrap();
        let total = post.continuous_end() + post.atom_weight;
        assert!((total - 1.0).abs() < 1e-8);
        assert!(post.cdf_grid.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(post.cdf(1.0), 1.0);
        // unadjusted posterior with flat prior is a Gamma(k+1, Σy) kernel
        let expect_mean = 81.0 / (80.0 * 1.6);
        assert!((post.mean() - expect_mean).abs() < 1e-3, "{}", post.mean());
    }

    #[test]
    fn unit_slope_adjustment_is_identity() {
        let y = pseudo(1.4, 60);
        let plain = theta_posterior(&y, &ThetaPriorSpec::default(), false, None).unwrap();
        let f = fit(0.5, 4.0, &y);
        let adj = theta_posterior(&y, &ThetaPriorSpec::default(), true, Some(&f)).unwrap();
        for t in [0.2, 0.5, 0.7, 0.9] {
            assert!((plain.density_at(t) - adj.density_at(t)).abs() < 1e-9);
        }
        assert!((plain.atom_weight - adj.atom_weight).abs() < 1e-12);
    }

    #[test]
    fn no_atom_without_prior_mass() {
        let y = pseudo(1.2, 50);
        let prior = ThetaPriorSpec { atom_mass: 0.0, ..Default::default() };
        let post = theta_posterior(&y, &prior, false, None).unwrap();
        assert_eq!(post.atom_weight, 0.0);
        assert!((post.cdf(1.0 - 1e-10) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn prior_scaling_is_irrelevant() {
        let y = pseudo(1.5, 40);
        let a = theta_posterior(&y, &ThetaPriorSpec::default(), false, None).unwrap();
        let scaled = ThetaPriorSpec { continuous: ThetaDensity::from_fn(|_| 7.5), atom_mass: 0.1 };
        let b = theta_posterior(&y, &scaled, false, None).unwrap();
        assert!((a.mean() - b.mean()).abs() < 1e-10);
        assert!((a.atom_weight - b.atom_weight).abs() < 1e-10);
    }

    #[test]
    fn quantile_inverts_cdf_and_sampling_matches() {
        let y = pseudo(2.0, 100);
        let post = theta_posterior(&y, &ThetaPriorSpec::default(), false, None).unwrap();
        for u in [0.05, 0.5, 0.9] {
            let q = post.quantile(u);
            assert!((post.cdf(q) - u).abs() < 1e-8, "u={u}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s: Vec<f64> = (0..20_000).map(|_| post.sample(&mut rng)).collect();
        let m = crate::stats::mean(&s);
        assert!((m - post.mean()).abs() < 4.0 * post.sd() / (s.len() as f64).sqrt());
    }

    #[test]
    fn cut_below_adjusted_support() {
        let y = pseudo(1.8, 100);
        let f = fit(0.55, 0.25, &y);
        let post = theta_posterior(&y, &ThetaPriorSpec::default(), true, Some(&f)).unwrap();
        let cut = 0.55 - 0.55 * 0.55 * 0.5;
        assert_eq!(post.density_at(cut - 1e-6), 0.0);
        assert!(post.density_at(0.55) > 0.0);
        assert!((post.continuous_end() + post.atom_weight - 1.0).abs() < 1e-8);
    }
}
