//! Experiment configuration, read from TOML.

use serde::{Deserialize, Serialize};

use crate::bayes::ChainConfig;
use crate::blocks::BlockConfig;
use crate::error::{Error, Result};
use crate::simulate::{DgpSpec, Marginal, Model, DEFAULT_ARCH_BURN_IN};

/// Environment variable overriding [`ExperimentConfig::workers`].
pub const WORKERS_ENV: &str = "BM_EVT_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Bayesian symmetric.
    BS,
    /// Bayesian asymmetric.
    BA,
    /// Frequentist symmetric.
    FS,
    /// Frequentist asymmetric (Monte Carlo).
    FA,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::BS, Method::BA, Method::FS, Method::FA];

    pub fn is_bayesian(self) -> bool {
        matches!(self, Method::BS | Method::BA)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "BS" => Ok(Method::BS),
            "BA" => Ok(Method::BA),
            "FS" => Ok(Method::FS),
            "FA" => Ok(Method::FA),
            _ => Err(Error::Config(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Target {
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "theta")]
    Theta,
    RL,
    EQ,
}

impl Target {
    pub const ALL: [Target; 4] = [Target::Gamma, Target::Theta, Target::RL, Target::EQ];

    pub fn name(self) -> &'static str {
        match self {
            Target::Gamma => "gamma",
            Target::Theta => "theta",
            Target::RL => "RL",
            Target::EQ => "EQ",
        }
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gamma" => Ok(Target::Gamma),
            "theta" => Ok(Target::Theta),
            "rl" => Ok(Target::RL),
            "eq" | "var" => Ok(Target::EQ),
            _ => Err(Error::Config(format!("unknown target `{s}`"))),
        }
    }
}

/// A scalar or an array in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

fn zero_l() -> OneOrMany<usize> {
    OneOrMany::One(0)
}
fn default_reps() -> usize {
    1000
}
fn default_alpha() -> f64 {
    0.05
}
fn default_k() -> usize {
    crate::freq::DEFAULT_K
}
fn default_q() -> f64 {
    crate::freq::DEFAULT_Q
}
fn default_iters() -> usize {
    ChainConfig::default().iters
}
fn default_burn_in() -> usize {
    ChainConfig::default().burn_in
}
fn default_draws() -> usize {
    crate::freq::DEFAULT_MC_DRAWS
}
fn default_workers() -> usize {
    1
}
fn default_rl_tau() -> f64 {
    0.9
}
fn default_atom() -> f64 {
    0.1
}
fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_targets() -> Vec<Target> {
    Target::ALL.to_vec()
}

/// Monte-Carlo experiment over a grid of `(n, m, l)` settings.
///
/// `n`, `m` and `l` may each be a scalar or an array; arrays are zipped and scalars
/// broadcast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    pub eta: f64,
    #[serde(default)]
    pub marginal: Option<Marginal>,
    pub n: OneOrMany<usize>,
    pub m: OneOrMany<usize>,
    #[serde(default = "zero_l")]
    pub l: OneOrMany<usize>,
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_targets")]
    pub targets: Vec<Target>,
    #[serde(rename = "K", default = "default_k")]
    pub k_origins: usize,
    #[serde(default = "default_q")]
    pub q: f64,
    /// Posterior draws kept after burn-in.
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Monte-Carlo draws for asymmetric frequentist intervals.
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_rl_tau")]
    pub rl_tau: f64,
    /// Return-level horizon; defaults to the series length.
    #[serde(default)]
    pub rl_mstar: Option<usize>,
    /// Block size for the extremal index; defaults to `m`.
    #[serde(default)]
    pub m_tilde: Option<usize>,
    #[serde(default = "default_atom")]
    pub atom_mass: f64,
    #[serde(default)]
    pub arch_burn_in: Option<usize>,
}

/// One grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub k: usize,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Applies the worker-count environment override.
    pub fn with_env_overrides(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var(WORKERS_ENV) {
            self.workers = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")))?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn marginal(&self) -> Marginal {
        self.marginal.unwrap_or(match self.model {
            Model::Armax => Marginal::Frechet,
            Model::ClaytonMarkov => Marginal::Exponential,
            Model::Arch => Marginal::Implied,
        })
    }

    /// Process template for a cell (the seed is set per replication).
    pub fn dgp(&self, cell: &Cell) -> DgpSpec {
        DgpSpec {
            model: self.model,
            eta: self.eta,
            marginal: self.marginal(),
            n: cell.n,
            seed: 0,
            burn_in: if self.model == Model::Arch { self.arch_burn_in.unwrap_or(DEFAULT_ARCH_BURN_IN) } else { 0 },
        }
    }

    pub fn chain(&self, seed: u64) -> ChainConfig {
        ChainConfig { iters: self.iters, burn_in: self.burn_in, seed, ..ChainConfig::default() }
    }

    pub fn grid(&self) -> Result<Vec<Cell>> {
        let (n, m, l) = (self.n.to_vec(), self.m.to_vec(), self.l.to_vec());
        let len = n.len().max(m.len()).max(l.len());
        let pick = |v: &Vec<usize>, name: &str, i: usize| -> Result<usize> {
            match v.len() {
                1 => Ok(v[0]),
                x if x == len => Ok(v[i]),
                x => Err(Error::Config(format!("`{name}` has {x} entries but the grid has {len}"))),
            }
        };
        (0..len)
            .map(|i| {
                let (n, m, l) = (pick(&n, "n", i)?, pick(&m, "m", i)?, pick(&l, "l", i)?);
                let b = BlockConfig::new(n, m, l).map_err(|e| Error::Config(e.to_string()))?;
                if b.k < 4 {
                    return Err(Error::Config(format!("cell n={n}, m={m}, l={l} has only {} blocks", b.k)));
                }
                Ok(Cell { n, m, l, k: b.k })
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("alpha must lie in (0,1)".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::Config("q must lie in (0,1)".into()));
        }
        if self.k_origins == 0 || self.iters == 0 || self.draws == 0 {
            return Err(Error::Config("K, iters and draws must be positive".into()));
        }
        if !(self.rl_tau > 0.0 && self.rl_tau < 1.0) {
            return Err(Error::Config("rl_tau must lie in (0,1)".into()));
        }
        if !(0.0..1.0).contains(&self.atom_mass) {
            return Err(Error::Config("atom_mass must lie in [0,1)".into()));
        }
        if self.methods.is_empty() || self.targets.is_empty() {
            return Err(Error::Config("methods and targets must be nonempty".into()));
        }
        let probe = DgpSpec { n: 1, ..self.dgp(&Cell { n: 1, m: 1, l: 0, k: 1 }) };
        probe.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.grid()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_broadcasts() {
        let cfg = ExperimentConfig::from_toml(
            r#"
model = "armax"
eta = 0.5
n = [360, 1800]
m = 30
replications = 10
methods = ["BS", "FS"]
targets = ["gamma", "RL"]
K = 5
"#,
        )
        .unwrap();
        let g = cfg.grid().unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!((g[0].k, g[1].k), (12, 60));
        assert_eq!(cfg.k_origins, 5);
        assert_eq!(cfg.methods, vec![Method::BS, Method::FS]);
        assert_eq!(cfg.marginal(), Marginal::Frechet);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml("model = \"armax\"\neta = 0.5\nn = [360, 720]\nm = [30, 60, 90]").is_err());
        assert!(ExperimentConfig::from_toml("model = \"armax\"\neta = 0.5\nn = 360\nm = 30\nreplications = 0").is_err());
        assert!(ExperimentConfig::from_toml("model = \"armax\"\neta = 0.5\nn = 100\nm = 30").is_err());
        assert!(ExperimentConfig::from_toml("model = \"armax\"\neta = 0.5\nn = 360\nm = 30\nbogus = 1").is_err());
        assert!(ExperimentConfig::from_toml("model = \"armax\"\neta = 1.5\nn = 360\nm = 30").is_err());
    }
}
