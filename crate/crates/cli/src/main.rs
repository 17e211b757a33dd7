use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bm_evt::bayes::{
    credible_interval_asymmetric, credible_interval_symmetric, rl_posterior, sample_posterior, theta_posterior,
    var_posterior, ChainConfig, PosteriorSummary, PriorSpec, Samples, ThetaPriorSpec,
};
use bm_evt::blocks::block_maxima;
use bm_evt::freq::{
    ci_asymmetric_mc, ci_return_level_symmetric, ci_theta_symmetric, ci_var_symmetric, fit_gev_mle, fit_theta,
    return_level_point, var_point, GevFit, RiskQuery, DEFAULT_K, DEFAULT_MC_DRAWS, DEFAULT_Q,
};
use bm_evt::harness::{diagnose_blocks, run_coverage, run_mse_ratio, ExperimentConfig, Method};
use bm_evt::simulate::{ground_truth_registry, simulate, DgpSpec, Marginal, Model, DEFAULT_ARCH_BURN_IN};
use bm_evt::{Error, Interval};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "bm-evt", version, about = "Block-maxima inference for extremes of stationary time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a series, one value per line
    Simulate(SimulateArgs),
    /// Fit the GEV law to block maxima by maximum likelihood
    Fit(FitArgs),
    /// Estimate the extremal index
    Theta(ThetaArgs),
    /// Return level with an interval
    Rl(RlArgs),
    /// Extreme quantile (value at risk) with an interval
    Var(VarArgs),
    /// Sample the GEV posterior and the extremal-index posterior
    Posterior(PosteriorArgs),
    /// Coverage study from a TOML config
    Coverage(StudyArgs),
    /// Mean-squared-error ratio study from a TOML config
    Mse(StudyArgs),
    /// Block-size diagnostics
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    marginal: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ARCH_BURN_IN)]
    burn_in: usize,
    /// Write the ground-truth registry as JSON instead of simulating
    #[arg(long)]
    registry: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SeriesArgs {
    /// Text file with one value per line; '#' starts a comment
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct BlockArgs {
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    l: usize,
    #[arg(long, default_value_t = DEFAULT_Q)]
    q: f64,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    series: SeriesArgs,
    #[command(flatten)]
    blocks: BlockArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ThetaArgs {
    #[command(flatten)]
    series: SeriesArgs,
    #[arg(long)]
    m_tilde: usize,
    #[arg(long = "K", default_value_t = DEFAULT_K)]
    k_origins: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Also report the adjusted posterior with this atom mass at one
    #[arg(long, default_value_t = 0.1)]
    atom_mass: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IntervalArgs {
    #[arg(long, default_value = "FS")]
    method: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Monte-Carlo draws (FA) or retained posterior draws (BS, BA)
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long, default_value_t = 20_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RlArgs {
    #[command(flatten)]
    series: SeriesArgs,
    #[command(flatten)]
    blocks: BlockArgs,
    #[arg(long, default_value_t = 0.9)]
    tau: f64,
    /// Horizon block size; defaults to the series length
    #[arg(long)]
    m_star: Option<usize>,
    #[command(flatten)]
    interval: IntervalArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VarArgs {
    #[command(flatten)]
    series: SeriesArgs,
    #[command(flatten)]
    blocks: BlockArgs,
    #[arg(long)]
    tau_e: f64,
    /// Block size for the extremal index; defaults to m
    #[arg(long)]
    m_tilde: Option<usize>,
    #[arg(long = "K", default_value_t = DEFAULT_K)]
    k_origins: usize,
    #[command(flatten)]
    interval: IntervalArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PosteriorArgs {
    #[command(flatten)]
    series: SeriesArgs,
    #[command(flatten)]
    blocks: BlockArgs,
    #[arg(long, default_value_t = 100_000)]
    iters: usize,
    #[arg(long, default_value_t = 20_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Chain CSV
    #[arg(long)]
    out: PathBuf,
    /// Extremal-index posterior grid CSV (a JSON sidecar is written next to it)
    #[arg(long)]
    theta_out: Option<PathBuf>,
    #[arg(long = "K", default_value_t = DEFAULT_K)]
    k_origins: usize,
    #[arg(long, default_value_t = 0.1)]
    atom_mass: f64,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV report
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full JSON report including failure reasons
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    series: SeriesArgs,
    /// Comma-separated block sizes
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_Q)]
    q: f64,
    #[arg(long = "K", default_value_t = DEFAULT_K)]
    k_origins: usize,
    #[arg(long, default_value_t = 20)]
    lags: usize,
    /// Output directory for stability.csv, acf.csv and qq.csv
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) | Error::Io(_) | Error::SeriesTooShort { .. } => 1,
        _ => 2,
    }
}

fn run(cmd: Command) -> bm_evt::Result<()> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Theta(a) => cmd_theta(a),
        Command::Rl(a) => cmd_rl(a),
        Command::Var(a) => cmd_var(a),
        Command::Posterior(a) => cmd_posterior(a),
        Command::Coverage(a) => cmd_study(a, false),
        Command::Mse(a) => cmd_study(a, true),
        Command::Diagnose(a) => cmd_diagnose(a),
    }
}

fn read_series(path: &Path) -> bm_evt::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let v = line.split('#').next().unwrap_or("").trim();
        if v.is_empty() {
            continue;
        }
        let x: f64 = v
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("{}:{}: not a number: `{v}`", path.display(), i + 1)))?;
        if !x.is_finite() {
            return Err(Error::InvalidArgument(format!("{}:{}: non-finite value", path.display(), i + 1)));
        }
        out.push(x);
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument(format!("{}: no values", path.display())));
    }
    Ok(out)
}

fn emit(out: Option<&Path>, text: &str) -> bm_evt::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                so.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn emit_json(out: Option<&Path>, v: &Value) -> bm_evt::Result<()> {
    emit(out, &serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?)
}

fn parse_method(s: &str) -> bm_evt::Result<Method> {
    s.parse().map_err(|_| Error::InvalidArgument(format!("unknown method `{s}` (expected BS, BA, FS or FA)")))
}

fn interval_json(iv: &Interval) -> Value {
    json!({ "lower": iv.lower, "upper": iv.upper })
}

fn cmd_simulate(a: SimulateArgs) -> bm_evt::Result<()> {
    if a.registry {
        let v = serde_json::to_value(ground_truth_registry()).map_err(|e| Error::Io(e.to_string()))?;
        return emit_json(a.out.as_deref(), &v);
    }
    let need = |what: &str| Error::InvalidArgument(format!("--{what} is required"));
    let model: Model = a.model.ok_or_else(|| need("model"))?.parse()?;
    let eta = a.eta.ok_or_else(|| need("eta"))?;
    let n = a.n.ok_or_else(|| need("n"))?;
    let spec = match model {
        Model::Armax => DgpSpec::armax(n, eta, a.seed),
        Model::ClaytonMarkov => {
            let marginal: Marginal = a.marginal.as_deref().unwrap_or("exponential").parse()?;
            DgpSpec::clayton(n, eta, marginal, a.seed)
        }
        Model::Arch => DgpSpec { burn_in: a.burn_in, ..DgpSpec::arch(n, eta, a.seed) },
    };
    let (series, _) = simulate(&spec)?;
    let mut text = String::with_capacity(series.len() * 20);
    for v in series {
        text.push_str(&format!("{v}\n"));
    }
    emit(a.out.as_deref(), &text)
}

fn fit_blocks(series: &[f64], b: &BlockArgs) -> bm_evt::Result<(Vec<f64>, GevFit)> {
    let maxima = block_maxima(series, b.m, b.l)?;
    let fit = fit_gev_mle(&maxima, b.q)?;
    Ok((maxima, fit))
}

fn cmd_fit(a: FitArgs) -> bm_evt::Result<()> {
    let series = read_series(&a.series.input)?;
    let (_, fit) = fit_blocks(&series, &a.blocks)?;
    let se = fit.std_errors();
    emit_json(
        a.out.as_deref(),
        &json!({
            "gamma": fit.params.gamma,
            "mu": fit.params.mu,
            "sigma": fit.params.sigma,
            "std_errors": se.map(|s| json!({ "gamma": s[0], "mu": s[1], "sigma": s[2] })),
            "loglik": fit.loglik,
            "k": fit.k,
            "m": a.blocks.m,
            "l": a.blocks.l,
            "q": fit.q,
            "converged": fit.converged,
            "regular": fit.is_regular(),
        }),
    )
}

fn cmd_theta(a: ThetaArgs) -> bm_evt::Result<()> {
    let series = read_series(&a.series.input)?;
    let t = fit_theta(&series, a.m_tilde, a.k_origins)?;
    let ci = ci_theta_symmetric(&t, a.alpha);
    let prior = ThetaPriorSpec { atom_mass: a.atom_mass, ..Default::default() };
    let post = theta_posterior(&t.pseudo, &prior, true, Some(&t))?;
    emit_json(
        a.out.as_deref(),
        &json!({
            "theta_hat": t.theta_hat,
            "sigma_tilde_sq": t.sigma_tilde_sq,
            "var_hat": t.var_hat,
            "k_tilde": t.k_tilde,
            "m_tilde": t.m_tilde,
            "K": t.k_origins,
            "interval": interval_json(&ci),
            "posterior": {
                "mean": post.mean(),
                "sd": post.sd(),
                "atom_weight": post.atom_weight,
                "symmetric": interval_json(&credible_interval_symmetric(&post, a.alpha, 0.0)),
                "asymmetric": interval_json(&credible_interval_asymmetric(&post, a.alpha)),
            },
        }),
    )
}

fn chain_for(maxima: &[f64], fit: &GevFit, iv: &IntervalArgs) -> bm_evt::Result<bm_evt::bayes::PosteriorChain> {
    let spec = PriorSpec::default_for(fit.shape_upper()).anchored(fit.params.mu, fit.params.sigma);
    let cfg = ChainConfig {
        iters: iv.draws.unwrap_or(ChainConfig::default().iters),
        burn_in: iv.burn_in,
        seed: iv.seed,
        ..ChainConfig::default()
    };
    sample_posterior(maxima, &spec, fit, &cfg)
}

fn bayes_interval(draws: &[f64], method: Method, alpha: f64) -> bm_evt::Result<(f64, Interval)> {
    let s = Samples::new(draws)?;
    let iv = if method == Method::BS {
        credible_interval_symmetric(&s, alpha, 0.0)
    } else {
        credible_interval_asymmetric(&s, alpha)
    };
    Ok((s.quantile(0.5), iv))
}

fn cmd_rl(a: RlArgs) -> bm_evt::Result<()> {
    let series = read_series(&a.series.input)?;
    let method = parse_method(&a.interval.method)?;
    let (maxima, fit) = fit_blocks(&series, &a.blocks)?;
    let m_star = a.m_star.unwrap_or(series.len());
    let query = RiskQuery::return_level(a.tau, a.blocks.m, m_star, a.interval.alpha);
    let point = return_level_point(&fit.params, a.tau, a.blocks.m, m_star)?;
    let (interval, median) = match method {
        Method::FS => (ci_return_level_symmetric(&fit, &query)?, None),
        Method::FA => {
            let draws = a.interval.draws.unwrap_or(DEFAULT_MC_DRAWS);
            (ci_asymmetric_mc(&fit, None, &query, draws, a.interval.seed)?, None)
        }
        _ => {
            let chain = chain_for(&maxima, &fit, &a.interval)?;
            let (med, iv) = bayes_interval(&rl_posterior(&chain, a.tau, a.blocks.m, m_star)?, method, a.interval.alpha)?;
            (iv, Some(med))
        }
    };
    emit_json(
        a.out.as_deref(),
        &json!({
            "point": point,
            "posterior_median": median,
            "interval": interval_json(&interval),
            "method": method.to_string(),
            "tau": a.tau,
            "m": a.blocks.m,
            "m_star": m_star,
            "alpha": a.interval.alpha,
        }),
    )
}

fn cmd_var(a: VarArgs) -> bm_evt::Result<()> {
    let series = read_series(&a.series.input)?;
    let method = parse_method(&a.interval.method)?;
    let (maxima, fit) = fit_blocks(&series, &a.blocks)?;
    let theta = fit_theta(&series, a.m_tilde.unwrap_or(a.blocks.m), a.k_origins)?;
    let query = RiskQuery::var(a.tau_e, a.blocks.m, a.interval.alpha);
    let point = var_point(&fit.params, theta.theta_hat, a.tau_e, a.blocks.m)?;
    let (interval, median) = match method {
        Method::FS => (ci_var_symmetric(&fit, &theta, &query)?, None),
        Method::FA => {
            let draws = a.interval.draws.unwrap_or(DEFAULT_MC_DRAWS);
            (ci_asymmetric_mc(&fit, Some(&theta), &query, draws, a.interval.seed)?, None)
        }
        _ => {
            let chain = chain_for(&maxima, &fit, &a.interval)?;
            let post = theta_posterior(&theta.pseudo, &ThetaPriorSpec::default(), true, Some(&theta))?;
            let draws = var_posterior(&chain, &post, a.tau_e, a.blocks.m, a.interval.seed ^ 0x7e7a)?;
            let (med, iv) = bayes_interval(&draws, method, a.interval.alpha)?;
            (iv, Some(med))
        }
    };
    emit_json(
        a.out.as_deref(),
        &json!({
            "point": point,
            "posterior_median": median,
            "interval": interval_json(&interval),
            "method": method.to_string(),
            "tau_e": a.tau_e,
            "m": a.blocks.m,
            "theta_hat": theta.theta_hat,
            "alpha": a.interval.alpha,
        }),
    )
}

fn cmd_posterior(a: PosteriorArgs) -> bm_evt::Result<()> {
    let series = read_series(&a.series.input)?;
    let (maxima, fit) = fit_blocks(&series, &a.blocks)?;
    let spec = PriorSpec::default_for(fit.shape_upper()).anchored(fit.params.mu, fit.params.sigma);
    let cfg = ChainConfig { iters: a.iters, burn_in: a.burn_in, thin: a.thin, seed: a.seed, ..ChainConfig::default() };
    let chain = sample_posterior(&maxima, &spec, &fit, &cfg)?;
    chain.save_csv(&a.out)?;
    if let Some(path) = a.theta_out {
        let theta = fit_theta(&series, a.blocks.m, a.k_origins)?;
        let prior = ThetaPriorSpec { atom_mass: a.atom_mass, ..Default::default() };
        theta_posterior(&theta.pseudo, &prior, true, Some(&theta))?.save(&path)?;
    }
    eprintln!(
        "{} draws, acceptance rate {:.3}, effective sizes (gamma, mu, sigma) = ({:.0}, {:.0}, {:.0})",
        chain.len(),
        chain.acceptance_rate,
        chain.ess[0],
        chain.ess[1],
        chain.ess[2]
    );
    Ok(())
}

fn cmd_study(a: StudyArgs, mse: bool) -> bm_evt::Result<()> {
    let cfg = ExperimentConfig::load(&a.config)?.with_env_overrides()?;
    let mut csv = Vec::new();
    let json = if mse {
        let r = run_mse_ratio(&cfg)?;
        r.write_csv(&mut csv)?;
        serde_json::to_value(&r)
    } else {
        let r = run_coverage(&cfg)?;
        r.write_csv(&mut csv)?;
        serde_json::to_value(&r)
    }
    .map_err(|e| Error::Io(e.to_string()))?;
    emit(a.out.as_deref(), &String::from_utf8_lossy(&csv))?;
    if let Some(p) = a.json {
        emit_json(Some(&p), &json)?;
    }
    Ok(())
}

fn cmd_diagnose(a: DiagnoseArgs) -> bm_evt::Result<()> {
    let series = read_series(&a.series.input)?;
    let d = diagnose_blocks(&series, &a.m, a.alpha, a.q, a.k_origins, a.lags)?;
    d.save(&a.out)
}
