//! Monte-Carlo coverage and mean-squared-error studies.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Cell, ExperimentConfig, Method, Target};
use crate::bayes::{
    credible_interval_asymmetric, credible_interval_symmetric, rl_posterior, sample_posterior, theta_posterior,
    var_posterior, PosteriorChain, PosteriorSummary, PriorSpec, Samples, ThetaPosterior, ThetaPriorSpec,
};
use crate::blocks::block_maxima;
use crate::error::{Error, Result};
use crate::freq::{
    ci_asymmetric_mc, ci_gamma_symmetric, ci_return_level_symmetric, ci_theta_symmetric, ci_var_symmetric, fit_gev_mle,
    fit_theta, return_level_point, var_point, GevFit, RiskQuery, ThetaFit,
};
use crate::interval::Interval;
use crate::simulate::{derive_seed, eq_truth, ground_truth, rl_truth, simulate, DgpSpec};

/// Largest tolerated fraction of failed replications in a cell.
pub const MAX_FAILURE_RATE: f64 = 0.2;

/// Coverage of one (cell, method, target) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub method: Method,
    pub target: Target,
    pub coverage: f64,
    pub width: f64,
    /// Replications that produced an interval.
    pub reps: usize,
    pub failed: usize,
    /// Binomial standard error `sqrt(c(1-c)/reps)`.
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailures {
    pub n: usize,
    pub m: usize,
    /// Reason code to count, over all method/target pairs.
    pub reasons: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
    pub failures: Vec<CellFailures>,
}

/// Ratio of mean squared errors of the posterior median over the MLE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub target: Target,
    pub ratio: f64,
    pub mse_posterior: f64,
    pub mse_mle: f64,
    pub reps: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    pub rows: Vec<MseRow>,
    pub failures: Vec<CellFailures>,
}

fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

impl CoverageReport {
    /// CSV with columns `n,k,m,method,target,coverage,width,reps,failed,mc_se`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(out, &self.rows)
    }

    pub fn get(&self, n: usize, m: usize, method: Method, target: Target) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.n == n && r.m == m && r.method == method && r.target == target)
    }
}

impl MseReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(out, &self.rows)
    }

    pub fn get(&self, n: usize, m: usize, target: Target) -> Option<&MseRow> {
        self.rows.iter().find(|r| r.n == n && r.m == m && r.target == target)
    }
}

/// Truth values of a cell.
#[derive(Debug, Clone, Copy)]
struct Truths {
    gamma: Option<f64>,
    theta: Option<f64>,
    rl: Option<f64>,
    eq: Option<f64>,
}

impl Truths {
    fn get(&self, t: Target) -> Option<f64> {
        match t {
            Target::Gamma => self.gamma,
            Target::Theta => self.theta,
            Target::RL => self.rl,
            Target::EQ => self.eq,
        }
    }
}

struct CellPlan<'a> {
    cfg: &'a ExperimentConfig,
    cell: Cell,
    dgp: DgpSpec,
    m_star: usize,
    tau_e: f64,
}

impl CellPlan<'_> {
    fn truths(&self, targets: &[Target]) -> Result<Truths> {
        let g = ground_truth(&self.dgp);
        let need = |t| targets.contains(&t);
        let missing = |what: &str| Error::Config(format!("no known {what} for this process"));
        Ok(Truths {
            gamma: if need(Target::Gamma) { Some(g.gamma0.ok_or_else(|| missing("shape"))?) } else { None },
            theta: if need(Target::Theta) { Some(g.theta0.ok_or_else(|| missing("extremal index"))?) } else { None },
            rl: if need(Target::RL) { Some(rl_truth(&self.dgp, self.cfg.rl_tau, self.m_star)?.value) } else { None },
            eq: if need(Target::EQ) { Some(eq_truth(&self.dgp, self.tau_e)?) } else { None },
        })
    }

    fn rl_query(&self) -> RiskQuery {
        RiskQuery::return_level(self.cfg.rl_tau, self.cell.m, self.m_star, self.cfg.alpha)
    }

    fn eq_query(&self) -> RiskQuery {
        RiskQuery::var(self.tau_e, self.cell.m, self.cfg.alpha)
    }
}

/// Everything estimated in one replication.
struct Fitted {
    maxima: Vec<f64>,
    fit: GevFit,
    theta: Option<ThetaFit>,
}

struct Posterior {
    chain: PosteriorChain,
    theta: Option<ThetaPosterior>,
}

fn fit_replication(plan: &CellPlan, series: &[f64], need_theta: bool) -> Result<Fitted> {
    let maxima = block_maxima(series, plan.cell.m, plan.cell.l)?;
    let fit = fit_gev_mle(&maxima, plan.cfg.q)?;
    let theta = if need_theta {
        Some(fit_theta(series, plan.cfg.m_tilde.unwrap_or(plan.cell.m), plan.cfg.k_origins)?)
    } else {
        None
    };
    Ok(Fitted { maxima, fit, theta })
}

fn posterior(plan: &CellPlan, f: &Fitted, seed: u64) -> Result<Posterior> {
    let spec = PriorSpec::default_for(f.fit.shape_upper()).anchored(f.fit.params.mu, f.fit.params.sigma);
    let chain = sample_posterior(&f.maxima, &spec, &f.fit, &plan.cfg.chain(seed))?;
    let theta = match &f.theta {
        Some(t) => {
            let prior = ThetaPriorSpec { atom_mass: plan.cfg.atom_mass, ..Default::default() };
            Some(theta_posterior(&t.pseudo, &prior, true, Some(t))?)
        }
        None => None,
    };
    Ok(Posterior { chain, theta })
}

fn require<T>(x: Option<&T>) -> Result<&T> {
    x.ok_or_else(|| Error::Numerical("missing intermediate fit".into()))
}

fn frequentist_interval(plan: &CellPlan, f: &Fitted, method: Method, target: Target, seed: u64) -> Option<Result<Interval>> {
    let alpha = plan.cfg.alpha;
    Some(match (method, target) {
        (Method::FS, Target::Gamma) => ci_gamma_symmetric(&f.fit, alpha, 0.0),
        (Method::FS, Target::Theta) => require(f.theta.as_ref()).map(|t| ci_theta_symmetric(t, alpha)),
        (Method::FS, Target::RL) => ci_return_level_symmetric(&f.fit, &plan.rl_query()),
        (Method::FS, Target::EQ) => require(f.theta.as_ref()).and_then(|t| ci_var_symmetric(&f.fit, t, &plan.eq_query())),
        (Method::FA, Target::RL) => ci_asymmetric_mc(&f.fit, None, &plan.rl_query(), plan.cfg.draws, seed),
        (Method::FA, Target::EQ) => require(f.theta.as_ref())
            .and_then(|t| ci_asymmetric_mc(&f.fit, Some(t), &plan.eq_query(), plan.cfg.draws, seed)),
        _ => return None,
    })
}

fn bayes_samples(plan: &CellPlan, p: &Posterior, target: Target, seed: u64) -> Result<Option<Samples>> {
    let draws = match target {
        Target::Gamma => p.chain.gamma(),
        Target::Theta => return Ok(None),
        Target::RL => rl_posterior(&p.chain, plan.cfg.rl_tau, plan.cell.m, plan.m_star)?,
        Target::EQ => var_posterior(&p.chain, require(p.theta.as_ref())?, plan.tau_e, plan.cell.m, seed)?,
    };
    Samples::new(&draws).map(Some)
}

fn bayes_interval(plan: &CellPlan, p: &Posterior, method: Method, target: Target, seed: u64) -> Result<Interval> {
    let alpha = plan.cfg.alpha;
    let summary: Box<dyn PosteriorSummary> = match bayes_samples(plan, p, target, seed)? {
        Some(s) => Box::new(s),
        None => Box::new(require(p.theta.as_ref())?.clone()),
    };
    Ok(match method {
        Method::BS => credible_interval_symmetric(summary.as_ref(), alpha, 0.0),
        _ => credible_interval_asymmetric(summary.as_ref(), alpha),
    })
}

type Scored = Vec<((Method, Target), std::result::Result<Interval, &'static str>)>;

fn coverage_replication(plan: &CellPlan, rep_seed: u64, pairs: &[(Method, Target)]) -> Scored {
    let fail_all = |code: &'static str| pairs.iter().map(|p| (*p, Err(code))).collect::<Scored>();
    let (series, _) = match simulate(&plan.dgp.with_seed(derive_seed(rep_seed, 0))) {
        Ok(s) => s,
        Err(e) => return fail_all(e.code()),
    };
    let need_theta = pairs.iter().any(|(_, t)| matches!(t, Target::Theta | Target::EQ));
    let fitted = match fit_replication(plan, &series, need_theta) {
        Ok(f) => f,
        Err(e) => return fail_all(e.code()),
    };
    let post = if pairs.iter().any(|(m, _)| m.is_bayesian()) {
        Some(posterior(plan, &fitted, derive_seed(rep_seed, 1)))
    } else {
        None
    };
    pairs
        .iter()
        .map(|&(method, target)| {
            let seed = derive_seed(rep_seed, 2 + method as u64 * 8 + target as u64);
            let r = if method.is_bayesian() {
                match post.as_ref().expect("posterior computed") {
                    Ok(p) => bayes_interval(plan, p, method, target, seed),
                    Err(e) => Err(e.clone()),
                }
            } else {
                frequentist_interval(plan, &fitted, method, target, seed).expect("pair filtered")
            };
            ((method, target), r.map_err(|e| e.code()))
        })
        .collect()
}

fn applicable(method: Method, target: Target) -> bool {
    !(method == Method::FA && matches!(target, Target::Gamma | Target::Theta))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| Error::Config(e.to_string()))
}

fn plan_for(cfg: &ExperimentConfig, cell: Cell) -> CellPlan<'_> {
    CellPlan { cfg, cell, dgp: cfg.dgp(&cell), m_star: cfg.rl_mstar.unwrap_or(cell.n), tau_e: 1.0 - 1.0 / cell.n as f64 }
}

fn check_failures(cell: &Cell, failed: usize, reps: usize, reasons: &BTreeMap<String, usize>) -> Result<()> {
    if failed as f64 > MAX_FAILURE_RATE * reps as f64 {
        return Err(Error::Numerical(format!(
            "cell n={}, m={}: {failed} of {reps} replications failed ({reasons:?})",
            cell.n, cell.m
        )));
    }
    Ok(())
}

/// Coverage study over every grid cell, method and target of `cfg`.
///
/// Replications run on `cfg.workers` threads with seeds derived from `base_seed`, the
/// cell index and the replication index, and are reduced in replication order, so the
/// report does not depend on the worker count.
pub fn run_coverage(cfg: &ExperimentConfig) -> Result<CoverageReport> {
    cfg.validate()?;
    let pool = pool(cfg.workers)?;
    let pairs: Vec<(Method, Target)> = cfg
        .methods
        .iter()
        .flat_map(|&m| cfg.targets.iter().map(move |&t| (m, t)))
        .filter(|&(m, t)| applicable(m, t))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (ci, cell) in cfg.grid()?.into_iter().enumerate() {
        let plan = plan_for(cfg, cell);
        let targets: Vec<Target> = pairs.iter().map(|p| p.1).collect();
        let truths = plan.truths(&targets)?;
        let cell_seed = derive_seed(cfg.base_seed, ci as u64);
        let results: Vec<Scored> = pool.install(|| {
            (0..cfg.replications)
                .into_par_iter()
                .map(|r| coverage_replication(&plan, derive_seed(cell_seed, r as u64), &pairs))
                .collect()
        });

        let mut reasons = BTreeMap::new();
        for (pi, &(method, target)) in pairs.iter().enumerate() {
            let truth = truths.get(target).expect("truth computed for every requested target");
            let (mut hits, mut scored, mut failed, mut width) = (0usize, 0usize, 0usize, 0.0);
            for rep in &results {
                match &rep[pi].1 {
                    Ok(iv) => {
                        scored += 1;
                        width += iv.width();
                        hits += iv.contains(truth) as usize;
                    }
                    Err(code) => {
                        failed += 1;
                        *reasons.entry(code.to_string()).or_insert(0) += 1;
                    }
                }
            }
            check_failures(&cell, failed, cfg.replications, &reasons)?;
            let coverage = if scored > 0 { hits as f64 / scored as f64 } else { f64::NAN };
            rows.push(CoverageRow {
                n: cell.n,
                k: cell.k,
                m: cell.m,
                method,
                target,
                coverage,
                width: width / scored.max(1) as f64,
                reps: scored,
                failed,
                mc_se: (coverage * (1.0 - coverage) / scored.max(1) as f64).sqrt(),
            });
        }
        failures.push(CellFailures { n: cell.n, m: cell.m, reasons });
    }
    Ok(CoverageReport { rows, failures })
}

type Estimates = std::result::Result<Vec<(f64, f64)>, &'static str>;

fn mse_replication(plan: &CellPlan, rep_seed: u64, targets: &[Target]) -> Estimates {
    let (series, _) = simulate(&plan.dgp.with_seed(derive_seed(rep_seed, 0))).map_err(|e| e.code())?;
    let need_theta = targets.iter().any(|t| matches!(t, Target::Theta | Target::EQ));
    let f = fit_replication(plan, &series, need_theta).map_err(|e| e.code())?;
    let p = posterior(plan, &f, derive_seed(rep_seed, 1)).map_err(|e| e.code())?;
    targets
        .iter()
        .map(|&t| {
            let seed = derive_seed(rep_seed, 2 + t as u64);
            let mle = match t {
                Target::Gamma => Ok(f.fit.params.gamma),
                Target::Theta => require(f.theta.as_ref()).map(|th| th.theta_hat),
                Target::RL => return_level_point(&f.fit.params, plan.cfg.rl_tau, plan.cell.m, plan.m_star),
                Target::EQ => require(f.theta.as_ref()).and_then(|th| var_point(&f.fit.params, th.theta_hat, plan.tau_e, plan.cell.m)),
            };
            let med = match t {
                Target::Theta => require(p.theta.as_ref()).map(|tp| tp.quantile(0.5)),
                _ => bayes_samples(plan, &p, t, seed).map(|s| s.expect("sample-based target").quantile(0.5)),
            };
            match (mle, med) {
                (Ok(a), Ok(b)) => Ok((a, b)),
                (Err(e), _) | (_, Err(e)) => Err(e.code()),
            }
        })
        .collect()
}

/// Mean-squared-error ratio study: posterior median versus maximum likelihood.
pub fn run_mse_ratio(cfg: &ExperimentConfig) -> Result<MseReport> {
    cfg.validate()?;
    let pool = pool(cfg.workers)?;
    let targets = cfg.targets.clone();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (ci, cell) in cfg.grid()?.into_iter().enumerate() {
        let plan = plan_for(cfg, cell);
        let truths = plan.truths(&targets)?;
        let cell_seed = derive_seed(cfg.base_seed, ci as u64);
        let results: Vec<Estimates> = pool.install(|| {
            (0..cfg.replications)
                .into_par_iter()
                .map(|r| mse_replication(&plan, derive_seed(cell_seed, r as u64), &targets))
                .collect()
        });
        let mut reasons = BTreeMap::new();
        let failed = results.iter().filter(|r| r.is_err()).count();
        for r in results.iter().filter_map(|r| r.as_ref().err()) {
            *reasons.entry(r.to_string()).or_insert(0) += 1;
        }
        check_failures(&cell, failed, cfg.replications, &reasons)?;
        for (ti, &target) in targets.iter().enumerate() {
            let truth = truths.get(target).expect("truth computed");
            let ok: Vec<(f64, f64)> = results.iter().filter_map(|r| r.as_ref().ok()).map(|v| v[ti]).collect();
            let mse_mle = ok.iter().map(|(a, _)| (a - truth).powi(2)).sum::<f64>() / ok.len().max(1) as f64;
            let mse_posterior = ok.iter().map(|(_, b)| (b - truth).powi(2)).sum::<f64>() / ok.len().max(1) as f64;
            rows.push(MseRow {
                n: cell.n,
                k: cell.k,
                m: cell.m,
                target,
                ratio: mse_posterior / mse_mle,
                mse_posterior,
                mse_mle,
                reps: ok.len(),
                failed,
            });
        }
        failures.push(CellFailures { n: cell.n, m: cell.m, reasons });
    }
    Ok(MseReport { rows, failures })
}

/// `Σ(b - truth)² / Σ(a - truth)²` for paired estimates.
pub fn mse_ratio(baseline: &[f64], candidate: &[f64], truth: f64) -> f64 {
    let num: f64 = candidate.iter().map(|v| (v - truth).powi(2)).sum();
    let den: f64 = baseline.iter().map(|v| (v - truth).powi(2)).sum();
    num / den
}
