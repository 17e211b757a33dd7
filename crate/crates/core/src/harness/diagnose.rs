//! Block-size diagnostics: estimate stability across block sizes, serial dependence of
//! the block maxima, and a uniform Q-Q check.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::blocks::{block_maxima, Ecdf};
use crate::error::{Error, Result};
use crate::freq::{ci_gamma_symmetric, ci_theta_symmetric, fit_gev_mle, fit_theta};
use crate::stats::{autocorrelations, z_two_sided};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub m: usize,
    pub k: usize,
    pub theta_hat: f64,
    pub theta_lower: f64,
    pub theta_upper: f64,
    /// `NaN` when the GEV fit failed at this block size.
    pub gamma_hat: f64,
    pub gamma_lower: f64,
    pub gamma_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfRow {
    pub m: usize,
    pub lag: usize,
    pub acf: f64,
    pub acf_squared: f64,
    /// Half-width `z/√k` of the band under independence.
    pub band: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqRow {
    pub m: usize,
    pub i: usize,
    /// Sorted `F_n(M_i)^{θ̂m}`.
    pub empirical: f64,
    /// `i/(k+1)`.
    pub uniform: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDiagnostics {
    pub stability: Vec<StabilityRow>,
    pub acf: Vec<AcfRow>,
    pub qq: Vec<QqRow>,
}

/// Diagnostic tables for each block size in `m_values` (with `l = 0`).
pub fn diagnose_blocks(
    series: &[f64],
    m_values: &[usize],
    alpha: f64,
    q: f64,
    k_origins: usize,
    max_lag: usize,
) -> Result<BlockDiagnostics> {
    if m_values.is_empty() {
        return Err(Error::InvalidArgument("no block sizes given".into()));
    }
    let largest = *m_values.iter().max().expect("nonempty");
    if series.len() < 2 * largest {
        return Err(Error::SeriesTooShort { needed: 2 * largest, got: series.len() });
    }
    let cdf = Ecdf::new(series, 1)?;
    let z = z_two_sided(alpha);
    let mut out = BlockDiagnostics { stability: Vec::new(), acf: Vec::new(), qq: Vec::new() };
    for &m in m_values {
        let maxima = block_maxima(series, m, 0)?;
        let k = maxima.len();
        let theta = fit_theta(series, m, k_origins)?;
        let t_ci = ci_theta_symmetric(&theta, alpha);
        let (g, g_ci) = match fit_gev_mle(&maxima, q) {
            Ok(fit) => {
                let ci = ci_gamma_symmetric(&fit, alpha, 0.0).map(|c| (c.lower, c.upper)).unwrap_or((f64::NAN, f64::NAN));
                (fit.params.gamma, ci)
            }
            Err(_) => (f64::NAN, (f64::NAN, f64::NAN)),
        };
        out.stability.push(StabilityRow {
            m,
            k,
            theta_hat: theta.theta_hat,
            theta_lower: t_ci.lower,
            theta_upper: t_ci.upper,
            gamma_hat: g,
            gamma_lower: g_ci.0,
            gamma_upper: g_ci.1,
        });

        let lags = max_lag.min(k.saturating_sub(1));
        let squares: Vec<f64> = maxima.iter().map(|v| v * v).collect();
        let band = z / (k as f64).sqrt();
        for (i, (a, b)) in autocorrelations(&maxima, lags).into_iter().zip(autocorrelations(&squares, lags)).enumerate() {
            out.acf.push(AcfRow { m, lag: i + 1, acf: a, acf_squared: b, band });
        }

        let power = theta.theta_hat * m as f64;
        let mut u: Vec<f64> = maxima.iter().map(|&x| cdf.eval(x).powf(power)).collect();
        u.sort_by(f64::total_cmp);
        for (i, v) in u.into_iter().enumerate() {
            out.qq.push(QqRow { m, i: i + 1, empirical: v, uniform: (i + 1) as f64 / (k + 1) as f64 });
        }
    }
    Ok(out)
}

impl BlockDiagnostics {
    /// Writes `stability.csv`, `acf.csv` and `qq.csv` into `dir`.
    pub fn save(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_csv(std::fs::File::create(dir.join("stability.csv"))?, &self.stability)?;
        write_csv(std::fs::File::create(dir.join("acf.csv"))?, &self.acf)?;
        write_csv(std::fs::File::create(dir.join("qq.csv"))?, &self.qq)?;
        Ok(())
    }
}

fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
