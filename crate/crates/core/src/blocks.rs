//! Disjoint big-block/small-block maxima, empirical distribution functions and the
//! extremal-index pseudo-observations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Big-block size `m`, small-block size `l` and the resulting block count `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub m: usize,
    pub l: usize,
    pub k: usize,
}

impl BlockConfig {
    /// Derives `k = ⌊n/(m+l)⌋` for a series of length `n`.
    pub fn new(n: usize, m: usize, l: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("block size m must be positive".into()));
        }
        if n < m + l {
            return Err(Error::SeriesTooShort { needed: m + l, got: n });
        }
        Ok(Self { m, l, k: n / (m + l) })
    }
}

/// Maxima of the `k` big blocks; small blocks and the trailing partial block are skipped.
pub fn block_maxima(series: &[f64], m: usize, l: usize) -> Result<Vec<f64>> {
    let cfg = BlockConfig::new(series.len(), m, l)?;
    Ok(series
        .chunks(m + l)
        .take(cfg.k)
        .map(|c| c[..m].iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect())
}

/// Right-closed empirical cdf of `series[j-1..]` (origin `j` is 1-based).
#[derive(Debug, Clone)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(series: &[f64], origin: usize) -> Result<Self> {
        if origin == 0 || origin > series.len() {
            return Err(Error::InvalidArgument(format!(
                "ecdf origin {origin} outside 1..={}",
                series.len()
            )));
        }
        let mut sorted = series[origin - 1..].to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Number of sample points `≤ x`.
    pub fn count_le(&self, x: f64) -> usize {
        self.sorted.partition_point(|&v| v <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.count_le(x) as f64 / self.sorted.len() as f64
    }
}

/// Shorthand for `Ecdf::new(series, origin)?.eval(x)`.
pub fn ecdf(series: &[f64], origin: usize, x: f64) -> Result<f64> {
    Ok(Ecdf::new(series, origin)?.eval(x))
}

/// Pseudo-observations `Ŷ_i = -m̃ log F_n^{(j)}(M^{(j)}_{i,m̃})` built from `l = 0` blocks of
/// `series[j-1..]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoObs {
    pub y: Vec<f64>,
    pub m_tilde: usize,
    pub k_tilde: usize,
}

impl PseudoObs {
    pub fn sum(&self) -> f64 {
        self.y.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.k_tilde as f64
    }
}

pub fn pseudo_observations(series: &[f64], m_tilde: usize, origin: usize) -> Result<PseudoObs> {
    let cdf = Ecdf::new(series, origin)?;
    let suffix = &series[origin - 1..];
    let maxima = block_maxima(suffix, m_tilde, 0)?;
    let y: Vec<f64> = maxima
        .iter()
        .map(|&mx| {
            let f = cdf.eval(mx);
            debug_assert!(f > 0.0);
            if f >= 1.0 {
                0.0
            } else {
                -(m_tilde as f64) * f.ln()
            }
        })
        .collect();
    Ok(PseudoObs { k_tilde: y.len(), y, m_tilde })
}
