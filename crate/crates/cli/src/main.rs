//! Batch front end for the step-stress degradation toolkit.
//!
//! Six subcommands cover the whole workflow: `simulate` draws synthetic
//! datasets, `fit` runs maximum likelihood, `bayes` samples the posterior,
//! `fisher` evaluates the expected information matrix, `plan` searches the
//! variance-optimal stress change time over a percentile grid, and
//! `mc-study` runs a simulate-and-refit accuracy study.
//!
//! Structured results leave as JSON, tabular results as CSV. Every artifact
//! embeds the root seed, a hash of the fully resolved run configuration,
//! and the tool version, so any output file identifies the run that made
//! it. Exit status is 0 on success, 1 on a configuration or domain error
//! (with a diagnostic on stderr), and 2 when an iterative routine failed
//! to converge.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ssalt_core::bayes::{rw_mh, summarize_chain, BayesConfig, PriorConfig};
use ssalt_core::data::Dataset;
use ssalt_core::error::{Error, Result};
use ssalt_core::fisher::fisher_matrix;
use ssalt_core::fixtures;
use ssalt_core::io;
use ssalt_core::likelihood::{fit_mle, Parameterization};
use ssalt_core::model::link_to_natural;
use ssalt_core::planner::plan_report;
use ssalt_core::rng::StreamRng;
use ssalt_core::simulate::{mc_study, simulate_dataset};
use ssalt_core::{StressPlan, ThetaLink, ThetaNatural};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn main() {
    std::process::exit(run(std::env::args_os()));
}

/// Parse `argv`, dispatch, and map the outcome to an exit status.
fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::NonConvergence(_) => 2,
                _ => 1,
            }
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ssalt",
    version,
    about = "Simulation, estimation, and design for a bivariate Wiener step-stress life test"
)]
struct Cli {
    /// Cap the number of worker threads used by parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a synthetic dataset and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit the model to a dataset by maximum likelihood, writing JSON.
    Fit(FitArgs),
    /// Sample the posterior by random walk Metropolis, writing a summary
    /// and optionally the kept draws.
    Bayes(BayesArgs),
    /// Evaluate the expected information matrix, writing JSON.
    Fisher(FisherArgs),
    /// Search the variance-optimal stress change time over a percentile
    /// grid, writing result and plot CSV tables.
    Plan(PlanArgs),
    /// Simulate-and-refit study of estimator accuracy, writing CSV.
    McStudy(McStudyArgs),
}

/// Flags shared by every subcommand that needs a test plan.
#[derive(Debug, Clone, Args)]
struct PlanFlags {
    /// Stress levels: use level and the two accelerated levels.
    #[arg(long = "plan", value_name = "S0,S1,S2", default_value = "950,1200,1400")]
    levels: String,
    /// Stress change time between the two accelerated levels.
    #[arg(long, default_value_t = 400.0)]
    tau: f64,
    /// Censoring time of the test.
    #[arg(long, default_value_t = 700.0)]
    censor: f64,
    /// Failure threshold of the latent degradation process.
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
}

impl PlanFlags {
    fn build(&self) -> Result<StressPlan> {
        let levels = parse_f64_list(&self.levels, Some(3), "--plan")?;
        StressPlan::two_level(
            levels[0],
            levels[1],
            levels[2],
            self.tau,
            self.censor,
            self.threshold,
        )
    }
}

/// Flags shared by every subcommand that reads a dataset.
#[derive(Debug, Clone, Args)]
struct InputFlags {
    /// Dataset CSV path.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Embedded example dataset.
    #[arg(long, value_enum)]
    fixture: Option<Fixture>,
}

impl InputFlags {
    /// Load the dataset, using `fallback` for files without an embedded
    /// plan. Exactly one source must be named.
    fn load(&self, fallback: &StressPlan) -> Result<Dataset> {
        match (&self.input, self.fixture) {
            (Some(path), None) => Ok(io::parse_dataset(path, Some(fallback))?.dataset),
            (None, Some(fixture)) => Ok(fixture.dataset()),
            _ => Err(Error::Domain(
                "pass exactly one of --input and --fixture".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Fixture {
    /// Simulated two level dataset with change time 300.
    Sim300,
    /// Simulated two level dataset with change time 400.
    Sim400,
    /// Simulated two level dataset with change time 500.
    Sim500,
    /// Failure ages and horizontal distortion of 29 aluminum cells.
    Aluminum,
}

impl Fixture {
    fn dataset(self) -> Dataset {
        match self {
            Fixture::Sim300 => fixtures::simulated_dataset(300),
            Fixture::Sim400 => fixtures::simulated_dataset(400),
            Fixture::Sim500 => fixtures::simulated_dataset(500),
            Fixture::Aluminum => fixtures::aluminum_dataset(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Fixture::Sim300 => "sim300",
            Fixture::Sim400 => "sim400",
            Fixture::Sim500 => "sim500",
            Fixture::Aluminum => "aluminum",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ParamSpace {
    /// Optimize the temperature-model coefficients.
    Link,
    /// Optimize the per level drifts directly.
    Mu,
}

impl ParamSpace {
    fn to_core(self) -> Parameterization {
        match self {
            ParamSpace::Link => Parameterization::LinkSpace,
            ParamSpace::Mu => Parameterization::MuSpace,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ParamSpace::Link => "link",
            ParamSpace::Mu => "mu",
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    plan: PlanFlags,
    /// Number of items on test.
    #[arg(long, default_value_t = 30)]
    n: usize,
    /// Root random seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Generating parameters on the link scale: a,b,c,d,sigma_x2,sigma_y2,rho.
    #[arg(long = "theta-star", value_name = "A,B,C,D,SX2,SY2,RHO")]
    theta_star: Option<String>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputFlags,
    #[command(flatten)]
    plan: PlanFlags,
    /// Search space for the optimizer.
    #[arg(long, value_enum, default_value_t = ParamSpace::Link)]
    parameterization: ParamSpace,
    /// Root random seed for the jittered extra starts.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BayesArgs {
    #[command(flatten)]
    input: InputFlags,
    #[command(flatten)]
    plan: PlanFlags,
    /// Total sweeps, burn-in included.
    #[arg(long = "iters", default_value_t = 50_000)]
    iters: usize,
    /// Sweeps discarded from the front of the chain.
    #[arg(long = "burnin", default_value_t = 10_000)]
    burnin: usize,
    /// Variance of the zero-mean normal priors on the link coefficients.
    #[arg(long = "prior-var", default_value_t = 1e4)]
    prior_var: f64,
    /// Chain start on the link scale; a maximum likelihood fit when absent.
    #[arg(long = "init-theta", value_name = "A,B,C,D,SX2,SY2,RHO")]
    init_theta: Option<String>,
    /// Root random seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Posterior summary JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Kept-draws CSV path; the chain is not written when absent.
    #[arg(long = "chain-out")]
    chain_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FisherArgs {
    #[command(flatten)]
    plan: PlanFlags,
    /// Number of items on test.
    #[arg(long, default_value_t = 30)]
    n: usize,
    /// Evaluation point on the link scale: a,b,c,d,sigma_x2,sigma_y2,rho.
    #[arg(long = "theta-star", value_name = "A,B,C,D,SX2,SY2,RHO")]
    theta_star: Option<String>,
    /// Evaluation point as per level drifts:
    /// mu_x1,mu_x2,mu_y1,mu_y2,sigma_x2,sigma_y2,rho.
    #[arg(long = "theta-nat", value_name = "MX1,MX2,MY1,MY2,SX2,SY2,RHO")]
    theta_nat: Option<String>,
    /// Output JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[command(flatten)]
    plan: PlanFlags,
    /// Number of items the candidate designs are scored with.
    #[arg(long, default_value_t = 29)]
    n: usize,
    /// Percentile levels of the target lifetime quantile.
    #[arg(
        long = "p-grid",
        value_name = "P1,P2,...",
        default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9"
    )]
    p_grid: String,
    /// Estimates on the link scale: a,b,c,d,sigma_x2,sigma_y2,rho.
    #[arg(long = "theta-star", value_name = "A,B,C,D,SX2,SY2,RHO")]
    theta_star: Option<String>,
    /// Estimates as per level drifts; the embedded aluminum estimates when
    /// neither this nor --theta-star is given.
    #[arg(long = "theta-nat", value_name = "MX1,MX2,MY1,MY2,SX2,SY2,RHO")]
    theta_nat: Option<String>,
    /// Result table CSV path; stdout when absent. Plot data for the change
    /// time and the coefficient of variation go to sibling files with
    /// `_tau` and `_cv` appended to the stem.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct McStudyArgs {
    #[command(flatten)]
    plan: PlanFlags,
    /// Items per replicated dataset.
    #[arg(long, default_value_t = 30)]
    n: usize,
    /// Number of simulate-and-refit replications.
    #[arg(long, default_value_t = 500)]
    reps: usize,
    /// Generating parameters on the link scale: a,b,c,d,sigma_x2,sigma_y2,rho.
    #[arg(long = "theta-star", value_name = "A,B,C,D,SX2,SY2,RHO")]
    theta_star: Option<String>,
    /// Root random seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Fully resolved inputs of one run, echoed into every artifact so any
/// output file identifies the run that produced it.
#[derive(Debug, Clone, Serialize)]
struct RunConfig {
    subcommand: &'static str,
    tool_version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fixture: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chain_out: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    plan: Option<StressPlan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    replications: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_star: Option<ThetaLink>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_nat: Option<ThetaNatural>,
    #[serde(skip_serializing_if = "Option::is_none")]
    parameterization: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    init: Option<ThetaLink>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prior_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    burn_in: Option<usize>,
}

impl RunConfig {
    fn new(subcommand: &'static str, threads: Option<usize>) -> Self {
        RunConfig {
            subcommand,
            tool_version: VERSION,
            threads,
            seed: None,
            input: None,
            fixture: None,
            out: None,
            chain_out: None,
            plan: None,
            n: None,
            replications: None,
            theta_star: None,
            theta_nat: None,
            parameterization: None,
            init: None,
            p_grid: None,
            prior_variance: None,
            iterations: None,
            burn_in: None,
        }
    }

    fn json(&self) -> String {
        serde_json::to_string(self).expect("run config serializes")
    }

    /// FNV-1a hash of the serialized config, as 16 hex digits.
    fn hash(&self) -> String {
        format!("{:016x}", fnv1a64(self.json().as_bytes()))
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Parse a comma-separated float list, checking the count when one is
/// expected.
fn parse_f64_list(text: &str, expected: Option<usize>, flag: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        let value: f64 = part
            .parse()
            .map_err(|_| Error::Parse(format!("{flag}: '{part}' is not a number")))?;
        values.push(value);
    }
    if let Some(count) = expected {
        if values.len() != count {
            return Err(Error::Parse(format!(
                "{flag}: expected {count} comma-separated values, got {}",
                values.len()
            )));
        }
    }
    Ok(values)
}

fn parse_theta_link(text: &str, flag: &str) -> Result<ThetaLink> {
    let v = parse_f64_list(text, Some(7), flag)?;
    ThetaLink::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6])
}

fn parse_theta_natural(text: &str, flag: &str) -> Result<ThetaNatural> {
    let v = parse_f64_list(text, Some(7), flag)?;
    ThetaNatural::new(vec![v[0], v[1]], vec![v[2], v[3]], v[4], v[5], v[6])
}

/// Link-scale generating parameters: the flag value, or the embedded
/// reference values when the flag is absent.
fn resolve_theta_star(flag: &Option<String>) -> Result<ThetaLink> {
    match flag {
        Some(text) => parse_theta_link(text, "--theta-star"),
        None => Ok(fixtures::reference_link_theta()),
    }
}

/// Natural-scale evaluation point from either flag; `default` fills in
/// when neither is given.
fn resolve_theta_natural(
    theta_star: &Option<String>,
    theta_nat: &Option<String>,
    plan: &StressPlan,
    default: ThetaNatural,
) -> Result<(ThetaNatural, Option<ThetaLink>)> {
    match (theta_star, theta_nat) {
        (Some(_), Some(_)) => Err(Error::Domain(
            "pass at most one of --theta-star and --theta-nat".into(),
        )),
        (Some(text), None) => {
            let link = parse_theta_link(text, "--theta-star")?;
            Ok((link_to_natural(&link, plan)?, Some(link)))
        }
        (None, Some(text)) => Ok((parse_theta_natural(text, "--theta-nat")?, None)),
        (None, None) => Ok((default, None)),
    }
}

/// Write `content` to `path`, or to stdout when no path is given.
fn emit(path: &Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn path_string(path: &Option<PathBuf>) -> Option<String> {
    path.as_ref().map(|p| p.display().to_string())
}

/// `plan.csv` with suffix `tau` becomes `plan_tau.csv`.
fn sibling_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    let extension = path
        .extension()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".to_string());
    path.with_file_name(format!("{stem}_{suffix}.{extension}"))
}

/// Comment header identifying the run, for CSV artifacts.
fn csv_metadata(config: &RunConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("# version: {VERSION}\n"));
    if let Some(seed) = config.seed {
        out.push_str(&format!("# seed: {seed}\n"));
    }
    out.push_str(&format!("# config_hash: {}\n", config.hash()));
    out.push_str(&format!("# config: {}\n", config.json()));
    out
}

/// Wrap a subcommand payload with the run identification block, as pretty
/// JSON.
fn json_artifact(config: &RunConfig, result: serde_json::Value) -> String {
    let artifact = serde_json::json!({
        "meta": {
            "version": VERSION,
            "seed": config.seed,
            "config_hash": config.hash(),
            "config": config,
        },
        "result": result,
    });
    let mut text = serde_json::to_string_pretty(&artifact).expect("artifact serializes");
    text.push('\n');
    text
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::Domain("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Unsupported(format!("thread pool setup failed: {e}")))?;
    }
    let threads = cli.threads;
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args, threads),
        Command::Fit(args) => cmd_fit(args, threads),
        Command::Bayes(args) => cmd_bayes(args, threads),
        Command::Fisher(args) => cmd_fisher(args, threads),
        Command::Plan(args) => cmd_plan(args, threads),
        Command::McStudy(args) => cmd_mc_study(args, threads),
    }
}

fn cmd_simulate(args: SimulateArgs, threads: Option<usize>) -> Result<()> {
    let plan = args.plan.build()?;
    let theta_link = resolve_theta_star(&args.theta_star)?;
    let theta = link_to_natural(&theta_link, &plan)?;
    if args.n == 0 {
        return Err(Error::Domain("--n must be at least 1".into()));
    }

    let mut config = RunConfig::new("simulate", threads);
    config.seed = Some(args.seed);
    config.plan = Some(plan.clone());
    config.n = Some(args.n);
    config.theta_star = Some(theta_link);
    config.out = path_string(&args.out);

    let parent = StreamRng::new(args.seed);
    let dataset = simulate_dataset(args.n, &theta, &plan, &parent)?;
    let seed = args.seed.to_string();
    let hash = config.hash();
    let config_json = config.json();
    let metadata: Vec<(&str, &str)> = vec![
        ("version", VERSION),
        ("seed", &seed),
        ("config_hash", &hash),
        ("config", &config_json),
    ];
    emit(&args.out, &io::render_dataset(&dataset, &metadata))
}

fn cmd_fit(args: FitArgs, threads: Option<usize>) -> Result<()> {
    let fallback = args.plan.build()?;
    let dataset = args.input.load(&fallback)?;

    let mut config = RunConfig::new("fit", threads);
    config.seed = Some(args.seed);
    config.input = path_string(&args.input.input);
    config.fixture = args.input.fixture.map(Fixture::name);
    config.plan = Some(dataset.plan.clone());
    config.parameterization = Some(args.parameterization.name());
    config.out = path_string(&args.out);

    let fit = fit_mle(&dataset, args.parameterization.to_core(), None, args.seed)?;
    let result = serde_json::json!({
        "theta_hat": fit.theta_hat,
        "theta_link_hat": fit.theta_link_hat,
        "loglik": fit.loglik,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "standard_errors": fit.standard_errors,
    });
    emit(&args.out, &json_artifact(&config, result))?;
    if !fit.converged {
        return Err(Error::NonConvergence(
            "the best optimizer start did not meet its tolerances; the artifact carries the best point found".into(),
        ));
    }
    Ok(())
}

fn cmd_bayes(args: BayesArgs, threads: Option<usize>) -> Result<()> {
    let fallback = args.plan.build()?;
    let dataset = args.input.load(&fallback)?;
    let bayes_config = BayesConfig {
        total: args.iters,
        burn_in: args.burnin,
        prior: PriorConfig {
            normal_variance: args.prior_var,
            ..PriorConfig::default()
        },
        proposal_scales: None,
        adapt: true,
    };
    bayes_config.validate()?;

    let init = match &args.init_theta {
        Some(text) => parse_theta_link(text, "--init-theta")?,
        None => {
            let fit = fit_mle(&dataset, Parameterization::LinkSpace, None, args.seed)?;
            fit.theta_link_hat.ok_or_else(|| {
                Error::Unsupported(
                    "posterior sampling needs link coefficients, so the plan must have two accelerated levels".into(),
                )
            })?
        }
    };

    let mut config = RunConfig::new("bayes", threads);
    config.seed = Some(args.seed);
    config.input = path_string(&args.input.input);
    config.fixture = args.input.fixture.map(Fixture::name);
    config.plan = Some(dataset.plan.clone());
    config.iterations = Some(args.iters);
    config.burn_in = Some(args.burnin);
    config.prior_variance = Some(args.prior_var);
    config.init = Some(init);
    config.out = path_string(&args.out);
    config.chain_out = path_string(&args.chain_out);

    let chain = rw_mh(&dataset, &init, &bayes_config, args.seed)?;
    let summary = summarize_chain(&chain)?;
    if let Some(chain_path) = &args.chain_out {
        let mut text = csv_metadata(&config);
        text.push_str(&chain.to_csv());
        std::fs::write(chain_path, text)?;
    }
    let result = serde_json::json!({
        "summary": summary,
        "acceptance_rate": chain.acceptance_rate(),
        "kept": chain.kept(),
    });
    emit(&args.out, &json_artifact(&config, result))
}

fn cmd_fisher(args: FisherArgs, threads: Option<usize>) -> Result<()> {
    let plan = args.plan.build()?;
    if args.n == 0 {
        return Err(Error::Domain("--n must be at least 1".into()));
    }
    let default = link_to_natural(&fixtures::reference_link_theta(), &plan)?;
    let (theta, theta_link) =
        resolve_theta_natural(&args.theta_star, &args.theta_nat, &plan, default)?;

    let mut config = RunConfig::new("fisher", threads);
    config.plan = Some(plan.clone());
    config.n = Some(args.n);
    config.theta_star = theta_link;
    config.theta_nat = Some(theta.clone());
    config.out = path_string(&args.out);

    let info = fisher_matrix(&theta, &plan, args.n)?;
    let result = serde_json::to_value(&info).expect("information matrix serializes");
    emit(&args.out, &json_artifact(&config, result))
}

fn cmd_plan(args: PlanArgs, threads: Option<usize>) -> Result<()> {
    let plan = args.plan.build()?;
    if args.n == 0 {
        return Err(Error::Domain("--n must be at least 1".into()));
    }
    let p_grid = parse_f64_list(&args.p_grid, None, "--p-grid")?;
    if p_grid.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(Error::Domain(
            "--p-grid: every percentile level must lie strictly between 0 and 1".into(),
        ));
    }
    let (theta, theta_link) =
        resolve_theta_natural(&args.theta_star, &args.theta_nat, &plan, fixtures::aluminum_mle())?;

    let mut config = RunConfig::new("plan", threads);
    config.plan = Some(plan.clone());
    config.n = Some(args.n);
    config.p_grid = Some(p_grid.clone());
    config.theta_star = theta_link;
    config.theta_nat = Some(theta.clone());
    config.out = path_string(&args.out);

    let report = plan_report(&p_grid, &theta, &plan, args.n)?;
    let metadata = csv_metadata(&config);
    let mut table = metadata.clone();
    table.push_str(&report.table_csv());
    emit(&args.out, &table)?;
    if let Some(out) = &args.out {
        let mut tau = metadata.clone();
        tau.push_str(&report.tau_csv());
        std::fs::write(sibling_path(out, "tau"), tau)?;
        let mut cv = metadata;
        cv.push_str(&report.cv_csv());
        std::fs::write(sibling_path(out, "cv"), cv)?;
    }
    Ok(())
}

fn cmd_mc_study(args: McStudyArgs, threads: Option<usize>) -> Result<()> {
    let plan = args.plan.build()?;
    let theta_link = resolve_theta_star(&args.theta_star)?;
    let theta = link_to_natural(&theta_link, &plan)?;
    if args.n == 0 || args.reps == 0 {
        return Err(Error::Domain("--n and --reps must be at least 1".into()));
    }

    let mut config = RunConfig::new("mc-study", threads);
    config.seed = Some(args.seed);
    config.plan = Some(plan.clone());
    config.n = Some(args.n);
    config.replications = Some(args.reps);
    config.theta_star = Some(theta_link);
    config.out = path_string(&args.out);

    let report = mc_study(args.reps, args.n, &theta, &plan, args.seed)?;
    let mut text = csv_metadata(&config);
    text.push_str(&format!("# replications: {}\n", report.replications));
    text.push_str(&format!("# converged: {}\n", report.converged));
    text.push_str("parameter,truth,relative_bias,relative_rmse\n");
    for i in 0..report.parameter_names.len() {
        text.push_str(&format!(
            "{},{},{},{}\n",
            report.parameter_names[i],
            report.true_values[i],
            report.relative_bias[i],
            report.relative_rmse[i],
        ));
    }
    emit(&args.out, &text)
}
