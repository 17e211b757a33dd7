//! Small descriptive-statistics helpers shared by the estimators and the harness.

use statrs::distribution::{ContinuousCDF, Normal};

/// Arithmetic mean, accumulated relative to the first value so constant inputs are exact.
pub fn mean(x: &[f64]) -> f64 {
    let Some(&c) = x.first() else {
        return f64::NAN;
    };
    c + x.iter().map(|v| v - c).sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn sd(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

/// `z_{1-α/2}`, the upper `α/2` standard normal quantile.
pub fn z_two_sided(alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

/// Empirical quantile with linear interpolation between order statistics (type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(x: &[f64], p: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, p)
}

pub fn median(x: &[f64]) -> f64 {
    quantile(x, 0.5)
}

/// Sample autocorrelations at lags `1..=max_lag`.
pub fn autocorrelations(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let c0: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (1..=max_lag)
        .map(|lag| {
            if lag >= n || c0 == 0.0 {
                return 0.0;
            }
            let c: f64 = (0..n - lag).map(|t| (x[t] - m) * (x[t + lag] - m)).sum();
            c / c0
        })
        .collect()
}

/// Effective sample size `n/τ` with `τ = -1 + 2 Σ_k (ρ_{2k} + ρ_{2k+1})`, summed over
/// the initial positive sequence of autocorrelation pairs.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(x);
    let c0: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    if c0 == 0.0 {
        return n as f64;
    }
    let rho = |lag: usize| (0..n - lag).map(|t| (x[t] - m) * (x[t + lag] - m)).sum::<f64>() / c0;
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n / 2 {
        let pair = if lag == 0 { 1.0 + rho(1) } else { rho(lag) + rho(lag + 1) };
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    n as f64 / tau.max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert!((quantile_sorted(&s, 0.5) - 2.5).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn z_value() {
        assert!((z_two_sided(0.05) - 1.959964).abs() < 1e-6);
    }

    #[test]
    fn ess_of_white_noise_is_close_to_n() {
        // deterministic pseudo-noise
        let x: Vec<f64> = (0..4000u64)
            .map(|i| ((i.wrapping_mul(2654435761) % 1000) as f64) / 1000.0)
            .collect();
        let ess = effective_sample_size(&x);
        assert!(ess > 2000.0, "{ess}");
    }
}
