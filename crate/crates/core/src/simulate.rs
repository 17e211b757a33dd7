//! Stationary time-series models with known extremal behaviour.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

pub const DEFAULT_ARCH_BURN_IN: usize = 1000;
/// Replications behind a brute-force return-level truth.
pub const RL_TRUTH_REPS: usize = 100_000;
const RL_TRUTH_SEED: u64 = 0x5eed_0f_7a11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Armax,
    ClaytonMarkov,
    Arch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marginal {
    Frechet,
    Exponential,
    Powerlaw,
    /// Whatever the recursion produces (ARCH).
    Implied,
}

impl std::str::FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "armax" => Ok(Model::Armax),
            "clayton_markov" | "clayton" | "copula" => Ok(Model::ClaytonMarkov),
            "arch" => Ok(Model::Arch),
            _ => Err(Error::InvalidArgument(format!("unknown model `{s}`"))),
        }
    }
}

impl std::str::FromStr for Marginal {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "frechet" => Ok(Marginal::Frechet),
            "exponential" | "exp" => Ok(Marginal::Exponential),
            "powerlaw" | "power_law" => Ok(Marginal::Powerlaw),
            "implied" => Ok(Marginal::Implied),
            _ => Err(Error::InvalidArgument(format!("unknown marginal `{s}`"))),
        }
    }
}

/// A data-generating process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub model: Model,
    pub eta: f64,
    pub marginal: Marginal,
    pub n: usize,
    pub seed: u64,
    pub burn_in: usize,
}

impl DgpSpec {
    pub fn armax(n: usize, eta: f64, seed: u64) -> Self {
        Self { model: Model::Armax, eta, marginal: Marginal::Frechet, n, seed, burn_in: 0 }
    }

    pub fn clayton(n: usize, eta: f64, marginal: Marginal, seed: u64) -> Self {
        Self { model: Model::ClaytonMarkov, eta, marginal, n, seed, burn_in: 0 }
    }

    pub fn arch(n: usize, eta: f64, seed: u64) -> Self {
        Self { model: Model::Arch, eta, marginal: Marginal::Implied, n, seed, burn_in: DEFAULT_ARCH_BURN_IN }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let eta = self.eta;
        let ok = match self.model {
            Model::Armax => (0.0..1.0).contains(&eta) && self.marginal == Marginal::Frechet,
            Model::ClaytonMarkov => eta > 0.0 && matches!(self.marginal, Marginal::Exponential | Marginal::Powerlaw),
            Model::Arch => eta > 0.0 && eta < 1.0 && self.marginal == Marginal::Implied,
        };
        if !ok || !eta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "invalid model settings: {:?} with eta={eta} and marginal {:?}",
                self.model, self.marginal
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("series length must be positive".into()));
        }
        Ok(())
    }
}

/// Known limiting quantities of a process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub gamma0: Option<f64>,
    pub theta0: Option<f64>,
    pub marginal: Marginal,
    pub model: Model,
    pub eta: f64,
}

impl GroundTruth {
    /// Exact marginal quantile `F⁻¹(τ)`, when available in closed form.
    pub fn marginal_quantile(&self, tau: f64) -> Result<f64> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidArgument(format!("probability level must lie in (0,1), got {tau}")));
        }
        match self.marginal {
            Marginal::Frechet => Ok(-1.0 / tau.ln()),
            Marginal::Exponential => Ok(-(-tau).ln_1p()),
            Marginal::Powerlaw => Ok(1.0 - (9.0 * (1.0 - tau)).cbrt()),
            Marginal::Implied => Err(Error::InvalidArgument("no closed-form marginal quantile for this model".into())),
        }
    }

    /// Norming constants `(a_m, b_m)` where known in closed form.
    pub fn norming(&self, m: usize) -> Option<(f64, f64)> {
        match (self.model, self.theta0) {
            (Model::Armax, Some(t)) => Some((t * m as f64, t * m as f64)),
            _ => None,
        }
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

pub fn ground_truth(spec: &DgpSpec) -> GroundTruth {
    let eta = spec.eta;
    let (gamma0, theta0) = match spec.model {
        Model::Armax => (Some(1.0), Some(1.0 - eta)),
        Model::ClaytonMarkov => {
            let g = match spec.marginal {
                Marginal::Exponential => Some(0.0),
                Marginal::Powerlaw => Some(-1.0 / 3.0),
                _ => None,
            };
            let t = if near(eta, 0.41) {
                Some(0.80)
            } else if near(eta, 1.06) {
                Some(0.40)
            } else {
                None
            };
            (g, t)
        }
        Model::Arch => {
            if near(eta, 0.5) {
                (Some(0.211), Some(0.832))
            } else if near(eta, 0.99) {
                (Some(0.493), Some(0.565))
            } else {
                (None, None)
            }
        }
    };
    GroundTruth { gamma0, theta0, marginal: spec.marginal, model: spec.model, eta }
}

/// Counter-based seed for stream `index` under `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

fn unit_frechet<R: Rng>(rng: &mut R) -> f64 {
    -1.0 / open_unit(rng).ln()
}

/// Sequential sampler for one of the models.
struct Stepper {
    spec: DgpSpec,
    rng: ChaCha8Rng,
    state: f64,
    started: bool,
}

impl Stepper {
    fn new(spec: &DgpSpec) -> Self {
        let mut s = Self { spec: *spec, rng: ChaCha8Rng::seed_from_u64(spec.seed), state: 0.0, started: false };
        if spec.model == Model::Arch {
            for _ in 0..spec.burn_in {
                s.next_value();
            }
        }
        s
    }

    fn next_value(&mut self) -> f64 {
        let eta = self.spec.eta;
        match self.spec.model {
            Model::Armax => {
                self.state = if self.started {
                    (eta * self.state).max((1.0 - eta) * unit_frechet(&mut self.rng))
                } else {
                    unit_frechet(&mut self.rng)
                };
                self.started = true;
                self.state
            }
            Model::ClaytonMarkov => {
                // state holds V_t = 1 - U_t
                self.state = if self.started {
                    let w = open_unit(&mut self.rng);
                    let a = w.powf(-eta / (1.0 + eta)) - 1.0;
                    (a * self.state.powf(-eta) + 1.0).powf(-1.0 / eta)
                } else {
                    open_unit(&mut self.rng)
                };
                self.started = true;
                let v = self.state;
                match self.spec.marginal {
                    Marginal::Exponential => -v.ln(),
                    _ => 1.0 - (9.0 * v).cbrt(),
                }
            }
            Model::Arch => {
                let z: f64 = self.rng.sample(StandardNormal);
                self.state = (2e-5 + eta * self.state * self.state).sqrt() * z;
                self.state
            }
        }
    }
}

/// Simulates `spec.n` values together with the process's ground truth.
pub fn simulate(spec: &DgpSpec) -> Result<(Vec<f64>, GroundTruth)> {
    spec.validate()?;
    let mut s = Stepper::new(spec);
    let series = (0..spec.n).map(|_| s.next_value()).collect();
    Ok((series, ground_truth(spec)))
}

pub fn simulate_armax(n: usize, eta: f64, seed: u64) -> Result<(Vec<f64>, GroundTruth)> {
    simulate(&DgpSpec::armax(n, eta, seed))
}

pub fn simulate_clayton_markov(n: usize, eta: f64, marginal: Marginal, seed: u64) -> Result<(Vec<f64>, GroundTruth)> {
    simulate(&DgpSpec::clayton(n, eta, marginal, seed))
}

pub fn simulate_arch(n: usize, eta: f64, seed: u64, burn_in: usize) -> Result<(Vec<f64>, GroundTruth)> {
    simulate(&DgpSpec { burn_in, ..DgpSpec::arch(n, eta, seed) })
}

/// A return-level truth with its Monte-Carlo standard error (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlTruth {
    pub value: f64,
    pub mc_se: f64,
    pub exact: bool,
}

/// Marginal quantile `Q₀(τ_E)` of the process.
pub fn eq_truth(spec: &DgpSpec, tau_e: f64) -> Result<f64> {
    spec.validate()?;
    ground_truth(spec).marginal_quantile(tau_e)
}

type RlKey = (Model, u64, Marginal, usize, usize, u64, u64);

fn rl_cache() -> &'static Mutex<HashMap<RlKey, RlTruth>> {
    static CACHE: OnceLock<Mutex<HashMap<RlKey, RlTruth>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `τ`-quantile of the maximum of `m_star` consecutive values.
///
/// Closed form for ARMAX, `(1 + (m*-1)(1-η))/(-log τ)`; otherwise the empirical quantile
/// over [`RL_TRUTH_REPS`] independent stretches, cached per process and level.
pub fn rl_truth(spec: &DgpSpec, tau: f64, m_star: usize) -> Result<RlTruth> {
    rl_truth_with(spec, tau, m_star, RL_TRUTH_REPS, RL_TRUTH_SEED)
}

pub fn rl_truth_with(spec: &DgpSpec, tau: f64, m_star: usize, reps: usize, seed: u64) -> Result<RlTruth> {
    spec.validate()?;
    if !(tau > 0.0 && tau < 1.0) || m_star == 0 {
        return Err(Error::InvalidArgument("need 0 < τ < 1 and a positive block size".into()));
    }
    if spec.model == Model::Armax {
        let value = (1.0 + (m_star as f64 - 1.0) * (1.0 - spec.eta)) / -tau.ln();
        return Ok(RlTruth { value, mc_se: 0.0, exact: true });
    }
    let key = (spec.model, spec.eta.to_bits(), spec.marginal, spec.burn_in, m_star, tau.to_bits(), seed ^ reps as u64);
    if let Some(t) = rl_cache().lock().expect("cache poisoned").get(&key) {
        return Ok(*t);
    }
    let t = brute_force_rl(spec, tau, m_star, reps, seed)?;
    rl_cache().lock().expect("cache poisoned").insert(key, t);
    Ok(t)
}

/// Empirical `τ`-quantile of block maxima over `reps` independent stretches, with a
/// standard error from the asymptotic quantile variance `τ(1-τ)/(R f²)`.
pub fn brute_force_rl(spec: &DgpSpec, tau: f64, m_star: usize, reps: usize, seed: u64) -> Result<RlTruth> {
    spec.validate()?;
    if reps < 100 {
        return Err(Error::InvalidArgument("need at least 100 replications".into()));
    }
    let mut maxima: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let s = spec.with_seed(derive_seed(seed, r as u64)).with_n(m_star);
            let mut st = Stepper::new(&s);
            (0..m_star).map(|_| st.next_value()).fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    maxima.sort_by(f64::total_cmp);
    let value = quantile_sorted(&maxima, tau);
    let h = (0.01f64).min(tau / 2.0).min((1.0 - tau) / 2.0);
    let slope = (quantile_sorted(&maxima, tau + h) - quantile_sorted(&maxima, tau - h)) / (2.0 * h);
    let mc_se = (tau * (1.0 - tau) / reps as f64).sqrt() * slope;
    Ok(RlTruth { value, mc_se, exact: false })
}

/// One entry of the exported ground-truth registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub model: Model,
    pub eta: f64,
    pub marginal: Marginal,
    pub gamma0: Option<f64>,
    pub theta0: Option<f64>,
    pub notes: String,
}

/// Ground truths of the built-in process configurations.
pub fn ground_truth_registry() -> Vec<RegistryEntry> {
    let entry = |spec: DgpSpec, notes: &str| {
        let g = ground_truth(&spec);
        RegistryEntry { model: spec.model, eta: spec.eta, marginal: spec.marginal, gamma0: g.gamma0, theta0: g.theta0, notes: notes.into() }
    };
    vec![
        entry(DgpSpec::armax(1, 0.0, 0), "iid unit Frechet; exact return levels"),
        entry(DgpSpec::armax(1, 0.5, 0), "theta0 = 1 - eta; exact return levels"),
        entry(DgpSpec::clayton(1, 0.41, Marginal::Exponential, 0), "theta0 from the literature"),
        entry(DgpSpec::clayton(1, 1.06, Marginal::Exponential, 0), "theta0 from the literature"),
        entry(DgpSpec::clayton(1, 0.41, Marginal::Powerlaw, 0), "theta0 from the literature"),
        entry(DgpSpec::clayton(1, 1.06, Marginal::Powerlaw, 0), "theta0 from the literature"),
        entry(DgpSpec::arch(1, 0.5, 0), "gamma0 and theta0 from the literature; marginal quantile by simulation only"),
        entry(DgpSpec::arch(1, 0.99, 0), "gamma0 and theta0 from the literature; marginal quantile by simulation only"),
    ]
}
