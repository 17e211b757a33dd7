use bm_evt::bayes::{sample_posterior, ChainConfig, PriorSpec};
use bm_evt::blocks::pseudo_observations;
use bm_evt::freq::{
    ci_asymmetric_mc, ci_gamma_symmetric, ci_return_level_symmetric, ci_theta_symmetric, ci_var_symmetric, fit_gev_mle,
    fit_theta, theta_mle, RiskQuery,
};
use bm_evt::simulate::simulate_armax;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gev_sample(gamma: f64, mu: f64, sigma: f64, k: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| {
            let u: f64 = rng.random_range(1e-300..1.0);
            let e = -u.ln();
            let z = if gamma == 0.0 { -e.ln() } else { (e.powf(-gamma) - 1.0) / gamma };
            mu + sigma * z
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mle_is_affine_equivariant(gamma in -0.3f64..0.6, a in 0.2f64..20.0, b in -50.0f64..50.0, seed in any::<u64>()) {
        let x = gev_sample(gamma, 0.0, 1.0, 300, seed);
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let fx = fit_gev_mle(&x, 0.5).unwrap();
        let fy = fit_gev_mle(&y, 0.5).unwrap();
        prop_assert!((fx.params.gamma - fy.params.gamma).abs() < 1e-4);
        prop_assert!((a * fx.params.mu + b - fy.params.mu).abs() < 1e-4 * a);
        prop_assert!((a * fx.params.sigma - fy.params.sigma).abs() < 1e-4 * a);
    }

    #[test]
    fn theta_is_invariant_under_increasing_maps(eta in 0.0f64..0.9, seed in any::<u64>(), c in 0.1f64..3.0) {
        let (x, _) = simulate_armax(600, eta, seed).unwrap();
        let t: Vec<f64> = x.iter().map(|v| c * v.ln() - 1.0).collect();
        let a = fit_theta(&x, 20, 5).unwrap();
        let b = fit_theta(&t, 20, 5).unwrap();
        prop_assert_eq!(a.theta_hat, b.theta_hat);
        prop_assert!((a.sigma_tilde_sq - b.sigma_tilde_sq).abs() < 1e-12 * (1.0 + a.sigma_tilde_sq));
    }

    #[test]
    fn theta_estimate_lies_in_unit_interval(eta in 0.0f64..0.95, seed in any::<u64>(), m in 2usize..40) {
        let (x, _) = simulate_armax(800, eta, seed).unwrap();
        let t = theta_mle(&pseudo_observations(&x, m, 1).unwrap());
        prop_assert!(t > 0.0 && t <= 1.0);
    }

    #[test]
    fn intervals_are_ordered_and_mc_is_reproducible(eta in 0.1f64..0.8, seed in any::<u64>()) {
        let (x, _) = simulate_armax(1200, eta, seed).unwrap();
        let maxima = bm_evt::blocks::block_maxima(&x, 20, 0).unwrap();
        let fit = fit_gev_mle(&maxima, 0.5).unwrap();
        prop_assume!(fit.is_regular());
        let theta = fit_theta(&x, 20, 10).unwrap();
        let rl = RiskQuery::return_level(0.9, 20, 1200, 0.05);
        let var = RiskQuery::var(1.0 - 1.0 / 1200.0, 20, 0.05);
        let intervals = [
            ci_gamma_symmetric(&fit, 0.05, 0.0).unwrap(),
            ci_theta_symmetric(&theta, 0.05),
            ci_return_level_symmetric(&fit, &rl).unwrap(),
            ci_var_symmetric(&fit, &theta, &var).unwrap(),
            ci_asymmetric_mc(&fit, None, &rl, 2000, seed).unwrap(),
            ci_asymmetric_mc(&fit, Some(&theta), &var, 2000, seed).unwrap(),
        ];
        for iv in intervals {
            prop_assert!(iv.lower <= iv.upper, "{iv:?}");
        }
        let again = ci_asymmetric_mc(&fit, Some(&theta), &var, 2000, seed).unwrap();
        prop_assert_eq!(again, intervals[5]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn chain_draws_stay_in_parameter_space(gamma in -0.3f64..0.8, seed in any::<u64>()) {
        let maxima = gev_sample(gamma, 2.0, 0.7, 60, seed);
        let fit = fit_gev_mle(&maxima, 0.5).unwrap();
        prop_assume!(fit.is_regular());
        let spec = PriorSpec::default_for(fit.shape_upper()).anchored(fit.params.mu, fit.params.sigma);
        let cfg = ChainConfig { iters: 3000, burn_in: 2000, seed, ..ChainConfig::default() };
        let chain = sample_posterior(&maxima, &spec, &fit, &cfg).unwrap();
        prop_assert!(chain.acceptance_rate > 0.0 && chain.acceptance_rate < 1.0);
        for (p, lp) in chain.draws.iter().zip(&chain.log_post) {
            prop_assert!(p.gamma > -0.5 && p.gamma < fit.shape_upper() && p.sigma > 0.0);
            prop_assert!(lp.is_finite());
            prop_assert!(maxima.iter().all(|&v| 1.0 + p.gamma * (v - p.mu) / p.sigma > 0.0));
        }
    }
}
