//! Library results checked against independent re-implementations and reference laws.

use bm_evt::blocks::block_maxima;
use bm_evt::freq::{expected_information, theta_sliding_variance};
use bm_evt::gev::gev_log_density;
use bm_evt::simulate::{simulate_armax, simulate_clayton_markov, Marginal};
use bm_evt::GevParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Literal evaluation of `σ̃²_{n,j}` with the empirical cdf of `X_j, ..., X_n`.
fn sigma_sq_literal(x: &[f64], m: usize, j: usize, nb: usize) -> f64 {
    let tail = &x[j - 1..];
    let f_n = |v: f64| tail.iter().filter(|&&t| t <= v).count() as f64 / tail.len() as f64;
    let mut maxima = Vec::new();
    for l in 0..nb {
        let mut mx = f64::NEG_INFINITY;
        for s in 0..m {
            mx = mx.max(tail[l * m + s]);
        }
        maxima.push(mx);
    }
    let y: Vec<f64> = maxima.iter().map(|&mx| -(m as f64) * f_n(mx).ln()).collect();
    let y_bar: f64 = y.iter().sum::<f64>() / nb as f64;
    let mut total = 0.0;
    for i in 0..nb {
        let mut corr = 0.0;
        for s in i * m..(i + 1) * m {
            let mut inner = 0.0;
            for l in 0..nb {
                let fm = f_n(maxima[l]);
                let ind = if f_n(tail[s]) <= fm { 1.0 } else { 0.0 };
                inner += (fm - ind) / fm;
            }
            corr += inner / nb as f64;
        }
        let d = y[i] - y_bar + corr;
        total += d * d;
    }
    total / nb as f64
}

#[test]
fn sliding_variance_matches_literal_formula_on_toy_series() {
    let x = [0.1, 0.9, 0.3, 0.7, 0.5, 0.2, 0.8, 0.4];
    let got = theta_sliding_variance(&x, 2, 1).unwrap();
    let want = sigma_sq_literal(&x, 2, 1, 4);
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");

    // two origins: j = 1 and j = ⌈m̃/2⌉ + 1 = 2
    let got2 = theta_sliding_variance(&x, 2, 2).unwrap();
    let want2 = (sigma_sq_literal(&x, 2, 1, 4) + sigma_sq_literal(&x, 2, 2, 3)) / 2.0;
    assert!((got2 - want2).abs() < 1e-12, "{got2} vs {want2}");
}

#[test]
fn sliding_variance_matches_literal_formula_on_random_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let m = rng.random_range(1..6usize);
        let n = rng.random_range(3 * m..60);
        let k_orig = rng.random_range(1..5usize);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let kt = n / m;
        let mut want = sigma_sq_literal(&x, m, 1, kt);
        for i in 2..=k_orig {
            let j = ((i - 1) as f64 * m as f64 / k_orig as f64).ceil() as usize + 1;
            want += sigma_sq_literal(&x, m, j, kt - 1);
        }
        want /= k_orig as f64;
        let got = theta_sliding_variance(&x, m, k_orig).unwrap();
        assert!((got - want).abs() < 1e-10 * (1.0 + want.abs()), "n={n} m={m} K={k_orig}: {got} vs {want}");
    }
}

fn naive_block_maxima(x: &[f64], m: usize, l: usize) -> Vec<f64> {
    let k = x.len() / (m + l);
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let start = i * (m + l);
        let mut best = x[start];
        for t in start + 1..start + m {
            if x[t] > best {
                best = x[t];
            }
        }
        out.push(best);
    }
    out
}

#[test]
fn block_maxima_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let n = rng.random_range(1..400usize);
        let m = rng.random_range(1..=n);
        let l = rng.random_range(0..=(n - m).min(20));
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
        assert_eq!(block_maxima(&x, m, l).unwrap(), naive_block_maxima(&x, m, l), "n={n} m={m} l={l}");
    }
}

/// Two-sided Kolmogorov–Smirnov statistic of `sample` against `cdf`.
fn ks_statistic(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn armax_marginal_is_unit_frechet() {
    // last value of independent paths, so the sample is iid
    let sample: Vec<f64> = (0..4000u64).map(|s| *simulate_armax(40, 0.5, s).unwrap().0.last().unwrap()).collect();
    let d = ks_statistic(sample, |x| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 });
    // 1% critical value 1.63/√n
    assert!(d < 1.63 / 4000f64.sqrt(), "KS = {d}");
}

#[test]
fn clayton_chain_has_uniform_margins_and_copula_tau() {
    let eta = 1.06;
    let sample: Vec<f64> = (0..4000u64)
        .map(|s| *simulate_clayton_markov(30, eta, Marginal::Exponential, s).unwrap().0.last().unwrap())
        .collect();
    let d = ks_statistic(sample.iter().map(|x| (-x).exp()).collect(), |u| u.clamp(0.0, 1.0));
    assert!(d < 1.63 / 4000f64.sqrt(), "KS = {d}");

    let (x, _) = simulate_clayton_markov(6000, eta, Marginal::Exponential, 99).unwrap();
    let pairs: Vec<(f64, f64)> = x.windows(2).map(|w| (w[0], w[1])).collect();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for a in 0..pairs.len() {
        for b in a + 1..pairs.len() {
            let s = (pairs[a].0 - pairs[b].0) * (pairs[a].1 - pairs[b].1);
            if s > 0.0 {
                concordant += 1;
            } else if s < 0.0 {
                discordant += 1;
            }
        }
    }
    let tau = (concordant - discordant) as f64 / (concordant + discordant) as f64;
    let want = eta / (eta + 2.0);
    assert!((tau - want).abs() < 0.02, "Kendall tau {tau} vs {want}");
}

/// Central finite-difference Hessian of the log-density in `(γ, μ, σ)`.
fn fd_hessian(x: f64, p: [f64; 3]) -> Option<[[f64; 3]; 3]> {
    let h = [1e-4, 1e-4 * p[2], 1e-4 * p[2]];
    let f = |q: [f64; 3]| gev_log_density(x, &GevParams::from_array(q));
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut v = 0.0;
            for (si, sj, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                let mut q = p;
                q[i] += si * h[i];
                q[j] += sj * h[j];
                v += w * f(q);
            }
            out[i][j] = v / (4.0 * h[i] * h[j]);
        }
    }
    out.iter().flatten().all(|v| v.is_finite()).then_some(out)
}

#[test]
fn expected_information_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for gamma in [-0.2, 0.1, 0.3] {
        let p = [gamma, 0.5, 1.5];
        let draws = 1_000_000;
        let mut sum = [[0.0; 3]; 3];
        let mut sum_sq = [[0.0; 3]; 3];
        let mut used = 0usize;
        for _ in 0..draws {
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            let z = ((-u.ln()).powf(-gamma) - 1.0) / gamma;
            let Some(h) = fd_hessian(p[1] + p[2] * z, p) else { continue };
            used += 1;
            for i in 0..3 {
                for j in 0..3 {
                    sum[i][j] -= h[i][j];
                    sum_sq[i][j] += h[i][j] * h[i][j];
                }
            }
        }
        assert!(used as f64 > 0.999 * draws as f64);
        let info = expected_information(&GevParams::from_array(p)).unwrap();
        let n = used as f64;
        for i in 0..3 {
            for j in 0..3 {
                let mc = sum[i][j] / n;
                let se = ((sum_sq[i][j] / n - mc * mc) / n).sqrt();
                let tol = (0.01 * info[i][j].abs()).max(4.0 * se);
                assert!((mc - info[i][j]).abs() < tol, "γ={gamma} [{i}][{j}]: MC {mc} ± {se} vs {}", info[i][j]);
            }
        }
    }
}
