use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use ciwnls::audit::{check_gain_feasible, run_audit, AuditError};
use ciwnls::centralized::CovarianceError;
use ciwnls::estimator::EstimatorError;
use ciwnls::graph::{generate_random_geometric, GraphError};
use ciwnls::harness::{self, benchmark_gain, benchmark_preset, run_monte_carlo, write_outputs, Experiment, HarnessError};
use ciwnls::{AuditConfig, CovarianceReport, ExperimentConfig, FeasibleSet, NetworkGraph, SensingModel};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const OUT_DIR_ENV: &str = "CIWNLS_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "ciwnls-out";

/// Distributed consensus+innovations WNLS estimation: graphs, audits,
/// asymptotic covariances and Monte Carlo ensembles.
#[derive(Debug, Parser)]
#[command(name = "ciwnls", version)]
struct Cli {
    /// Suppress progress output on standard error.
    #[arg(long, global = true)]
    quiet: bool,
    /// Cap on worker threads for Monte Carlo ensembles [default: all cores].
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a connected random geometric graph on the unit square.
    GraphGen(GraphGenArgs),
    /// Numerically check the modelling assumptions for a sensing model.
    Audit(AuditArgs),
    /// Closed-form asymptotic covariances at a parameter value.
    Covariance(CovarianceArgs),
    /// Run a Monte Carlo ensemble described by a config file.
    Simulate(SimulateArgs),
    /// Run the 10-agent pairwise-sine benchmark.
    ReproducePaper(ReproduceArgs),
}

#[derive(Debug, Args)]
struct GraphGenArgs {
    /// Number of agents.
    #[arg(long)]
    n: usize,
    /// Connection radius.
    #[arg(long)]
    radius: f64,
    /// Seed of the point draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file [default: standard output].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AuditArgs {
    /// Sensing model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Feasible set JSON (must be a box).
    #[arg(long)]
    set: PathBuf,
    /// Random pairs and random points per sweep.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Seed of the sampled points and pairs.
    #[arg(long, default_value_t = AuditConfig::default().seed)]
    seed: u64,
    /// Graph JSON; adds the connectivity check.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Comma-separated true parameter; adds the interior check.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CovarianceArgs {
    /// Use the 10-agent pairwise-sine benchmark for model, set, theta,
    /// agent count and gain unless given explicitly.
    #[arg(long)]
    benchmark: bool,
    /// Sensing model JSON.
    #[arg(long, required_unless_present = "benchmark")]
    model: Option<PathBuf>,
    /// Feasible set JSON; theta must lie inside it.
    #[arg(long)]
    set: Option<PathBuf>,
    /// Comma-separated parameter, entries like 0.5, -pi/7 or 2pi/3.
    #[arg(long, allow_hyphen_values = true, required_unless_present = "benchmark")]
    theta: Option<String>,
    /// Innovation gain; adds Σ_d and the gap.
    #[arg(long)]
    a: Option<f64>,
    /// Agent count N [default: agents in the model].
    #[arg(long)]
    n_agents: Option<usize>,
    /// Lipschitz-type constant k* for the gap bound.
    #[arg(long)]
    k_star: Option<f64>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory [default: config output_dir, then $CIWNLS_OUT_DIR, then ./ciwnls-out].
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the config's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the config's horizon.
    #[arg(long)]
    horizon: Option<u64>,
    /// Skip the assumption audit written to audit.json.
    #[arg(long)]
    no_audit: bool,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    /// Output directory [default: $CIWNLS_OUT_DIR, then ./ciwnls-out].
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the trial count [default: 250].
    #[arg(long)]
    trials: Option<usize>,
    /// Override the horizon [default: 5000].
    #[arg(long)]
    horizon: Option<u64>,
    /// Run the centralized track on the first K trials only.
    #[arg(long, value_name = "K")]
    centralized_trials: Option<usize>,
    /// Skip the assumption audit written to audit.json.
    #[arg(long)]
    no_audit: bool,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Numerical(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

fn invalid(context: impl fmt::Display, e: impl fmt::Display) -> CliError {
    CliError::Validation(format!("{context}: {e}"))
}

fn from_covariance(context: &str, e: CovarianceError) -> CliError {
    match e {
        CovarianceError::DimensionMismatch(_) | CovarianceError::InvalidLipschitzBound { .. } => invalid(context, e),
        _ => CliError::Numerical(format!("{context}: {e}")),
    }
}

fn from_harness(context: &str, e: HarnessError) -> CliError {
    match e {
        HarnessError::AllTrialsFailed { .. }
        | HarnessError::Estimator(EstimatorError::NonFinite { .. })
        | HarnessError::Covariance(_) => CliError::Numerical(format!("{context}: {e}")),
        _ => invalid(context, e),
    }
}

fn read_file(path: &Path, flag: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| invalid(format_args!("{flag} {}", path.display()), e))
}

fn write_file(path: &Path, flag: &str, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| invalid(format_args!("{flag} {}", path.display()), e))?;
    }
    fs::write(path, text).map_err(|e| invalid(format_args!("{flag} {}", path.display()), e))
}

fn emit(out: Option<&Path>, flag: &str, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, flag, text),
        None => {
            stdout(&format!("{text}\n"));
            Ok(())
        }
    }
}

// A closed pipe (`ciwnls ... | head`) is not an error worth a panic.
fn stdout(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn parse_entry(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim().parse::<f64>().ok()?),
        None => (s, 1.0),
    };
    let coef = num.strip_suffix("pi")?.trim();
    let coef = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.trim_end_matches('*').parse().ok()?,
    };
    Some(coef * std::f64::consts::PI / den)
}

/// Comma-separated reals; each entry may be a plain number or `[c]pi[/d]`.
fn parse_vector(text: &str, flag: &str) -> Result<DVector<f64>, CliError> {
    text.split(',')
        .map(|s| parse_entry(s).ok_or_else(|| invalid(flag, format_args!("cannot parse entry {s:?}"))))
        .collect::<Result<Vec<_>, _>>()
        .map(DVector::from_vec)
}

fn load_model(path: &Path) -> Result<SensingModel, CliError> {
    SensingModel::from_json(&read_file(path, "--model")?).map_err(|e| invalid(format_args!("--model {}", path.display()), e))
}

fn load_set(path: &Path) -> Result<FeasibleSet, CliError> {
    FeasibleSet::from_json(&read_file(path, "--set")?).map_err(|e| invalid(format_args!("--set {}", path.display()), e))
}

fn default_out_dir(explicit: Option<PathBuf>, config: Option<&Path>) -> PathBuf {
    explicit
        .or_else(|| config.map(Path::to_path_buf))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
}

fn graph_gen(args: GraphGenArgs) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let graph = generate_random_geometric(args.n, args.radius, &mut rng).map_err(|e| match e {
        GraphError::GenerationFailed { .. } => CliError::Numerical(format!("--radius {}: {e}", args.radius)),
        _ => invalid("--n/--radius", e),
    })?;
    emit(args.out.as_deref(), "--out", &graph.to_json())
}

fn audit(args: AuditArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let set = load_set(&args.set)?;
    let graph = match &args.graph {
        Some(p) => Some(
            NetworkGraph::from_json(&read_file(p, "--graph")?).map_err(|e| invalid(format_args!("--graph {}", p.display()), e))?,
        ),
        None => None,
    };
    let theta = args.theta.as_deref().map(|t| parse_vector(t, "--theta")).transpose()?;
    let config = AuditConfig {
        random_pairs: args.samples,
        random_points: args.samples,
        seed: args.seed,
        ..AuditConfig::default()
    };
    let report = run_audit(&model, &set, graph.as_ref(), theta.as_ref(), &config).map_err(|e| match e {
        AuditError::Unbounded => invalid(format_args!("--set {}", args.set.display()), e),
        AuditError::DimensionMismatch(_) => invalid("--model/--set", e),
    })?;
    stdout(&report.table());
    if let Some(out) = &args.out {
        write_file(out, "--out", &report.to_json())?;
    }
    Ok(())
}

fn covariance(args: CovarianceArgs) -> Result<(), CliError> {
    let model = match &args.model {
        Some(p) => load_model(p)?,
        None => harness::benchmark_model(),
    };
    let set = match &args.set {
        Some(p) => Some(load_set(p)?),
        None if args.benchmark => Some(harness::benchmark_set()),
        None => None,
    };
    let theta = match &args.theta {
        Some(t) => parse_vector(t, "--theta")?,
        None => harness::benchmark_theta(),
    };
    if theta.len() != model.param_dim() {
        return Err(invalid(
            "--theta",
            format_args!("{} entries, model expects {}", theta.len(), model.param_dim()),
        ));
    }
    if let Some(set) = &set {
        set.check_dim(model.param_dim()).map_err(|e| invalid("--set", e))?;
        if !set.contains(theta.as_slice()) {
            return Err(invalid("--theta", "outside the feasible set"));
        }
    }
    let n_agents = args.n_agents.unwrap_or(model.n_agents());
    if n_agents == 0 {
        return Err(invalid("--n-agents", "must be at least 1"));
    }
    let a = args.a.or_else(|| args.benchmark.then(|| benchmark_gain().a));
    let report = CovarianceReport::compute(&model, &theta, n_agents, a, args.k_star)
        .map_err(|e| from_covariance("--model/--theta/--a", e))?;
    emit(args.out.as_deref(), "--out", &report.to_json())
}

struct Progress {
    quiet: bool,
    last: Mutex<Option<Instant>>,
}

impl Progress {
    fn report(&self, done: usize, total: usize) {
        if self.quiet {
            return;
        }
        let mut last = self.last.lock().expect("progress lock");
        let now = Instant::now();
        if done == total || last.is_none_or(|t| now.duration_since(t) >= Duration::from_secs(1)) {
            *last = Some(now);
            eprintln!("trials {done}/{total}");
        }
    }
}

fn run_ensemble(config: ExperimentConfig, out_dir: &Path, with_audit: bool, cli: &Globals) -> Result<(), CliError> {
    let start = Instant::now();
    let experiment = Experiment::from_config(config).map_err(|e| from_harness("--config", e))?;
    let cfg = &experiment.config;
    if !cli.quiet {
        eprintln!(
            "{} agents, λ₂ = {:.4}, a = {}, {} trials × {} epochs",
            experiment.graph.n_agents(),
            experiment.graph.fiedler_value(),
            cfg.schedule.a(),
            cfg.trials,
            cfg.horizon
        );
    }
    let theta = experiment.theta_true.clone();
    let audit = if with_audit {
        let report = run_audit(
            &experiment.model,
            &cfg.feasible_set,
            Some(&experiment.graph),
            Some(&theta),
            &AuditConfig::default(),
        )
        .ok();
        if let (Some(r), false) = (&report, cli.quiet) {
            let feas = check_gain_feasible(&cfg.schedule, r);
            eprint!("{}", r.table());
            eprintln!(
                "gain a = {}: a·c₁ ≥ 1 {}, a > max(1/c₁, 1/(2Λ_min)) {}, δ₁ bound {}",
                cfg.schedule.a(),
                ok(feas.consistency_ok),
                ok(feas.normality_ok),
                ok(feas.delta1_ok)
            );
        }
        report
    } else {
        None
    };
    let covariance = CovarianceReport::compute(
        &experiment.model,
        &theta,
        experiment.model.n_agents(),
        Some(cfg.schedule.a()),
        audit.as_ref().map(|r| r.k_star_max),
    )
    .or_else(|_| CovarianceReport::compute(&experiment.model, &theta, experiment.model.n_agents(), None, None))
    .ok();

    let progress = Progress {
        quiet: cli.quiet,
        last: Mutex::new(None),
    };
    let report = |d: usize, t: usize| progress.report(d, t);
    let result = run_monte_carlo(&experiment, cli.jobs, Some(&report)).map_err(|e| from_harness("ensemble", e))?;
    let manifest = write_outputs(
        out_dir,
        &experiment,
        &result,
        covariance.as_ref().map(CovarianceReport::to_json).as_deref(),
        audit.as_ref().map(|r| r.to_json()).as_deref(),
        start.elapsed().as_secs_f64(),
    )
    .map_err(|e| from_harness("--out-dir", e))?;
    write_file(&out_dir.join("config.json"), "--out-dir", &cfg.to_json())?;

    if !cli.quiet {
        for (i, msg) in &result.failures {
            eprintln!("trial {i} failed: {msg}");
        }
        let last = result.terminal();
        let mean = last.mean_scaled_sq_error.iter().sum::<f64>() / last.mean_scaled_sq_error.len() as f64;
        eprintln!("epoch {}: mean (t+1)‖x_n − θ‖² over agents = {mean:.4}", last.epoch);
        if let Some(c) = &covariance {
            eprintln!("  tr Σ_c = {:.4}, tr Σ_d = {}", c.trace_sigma_c, fmt_opt(c.trace_sigma_d));
        }
        if let Some(rec) = result.terminal_centralized() {
            eprintln!(
                "  centralized (t+1)‖θ̂ − θ‖² at epoch {} = {:.4}",
                rec.epoch,
                rec.centralized_scaled_sq_error.unwrap_or(f64::NAN)
            );
        }
        eprintln!(
            "wrote {} ({} failed trials, {:.1}s)",
            out_dir.display(),
            manifest.failed_trials,
            manifest.wall_time_secs
        );
    }
    Ok(())
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILS"
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

struct Globals {
    quiet: bool,
    jobs: Option<usize>,
}

fn simulate(args: SimulateArgs, cli: &Globals) -> Result<(), CliError> {
    let text = read_file(&args.config, "--config")?;
    let mut config =
        ExperimentConfig::from_json(&text).map_err(|e| invalid(format_args!("--config {}", args.config.display()), e))?;
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if let Some(h) = args.horizon {
        config.horizon = h;
    }
    let out_dir = default_out_dir(args.out_dir, config.output_dir.as_deref());
    run_ensemble(config, &out_dir, !args.no_audit, cli)
}

fn reproduce(args: ReproduceArgs, cli: &Globals) -> Result<(), CliError> {
    let mut config = benchmark_preset();
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if let Some(h) = args.horizon {
        config.horizon = h;
    }
    if args.centralized_trials.is_some() {
        config.centralized_trials = args.centralized_trials;
    }
    let out_dir = default_out_dir(args.out_dir, None);
    run_ensemble(config, &out_dir, !args.no_audit, cli)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.jobs == Some(0) {
        return Err(invalid("--jobs", "must be at least 1"));
    }
    let globals = Globals {
        quiet: cli.quiet,
        jobs: cli.jobs,
    };
    match cli.command {
        Command::GraphGen(a) => graph_gen(a),
        Command::Audit(a) => audit(a),
        Command::Covariance(a) => covariance(a),
        Command::Simulate(a) => simulate(a, &globals),
        Command::ReproducePaper(a) => reproduce(a, &globals),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
