//! Subcommand definitions and dispatch.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rhp_core::cluster::{simulate_cluster, ClusterStats};
use rhp_core::events::{Convention, EventStream};
use rhp_core::pgfl::{
    hawkes_oakes_pgfl, mc_pgfl_cluster, renewal_pgfl_truncated, solve_cluster_pgfl, stationary_pgfl_expansion,
    RenewalPgflOptions, TestFunction,
};
use rhp_core::renewal::renewal_table;
use rhp_core::rng::{replicate, Lane};
use rhp_core::simulate::{
    baseline_intensity, compensator, intensity_path, simulate_rhp_cluster, simulate_rhp_stationary,
    simulate_rhp_thinning,
};
use rhp_core::validate::{
    cross_simulator_test, existence_preconditions, rescaled_gaps, stationarity_and_convergence, time_rescaling_test,
    DiagnosticsReport, Scenario,
};
use rhp_core::{ExcitationKernel, RenewalModel, RhpError};
use serde::Serialize;

use crate::config::{parse_config, ConfigError, RunConfig, SimMethod};
use crate::output::{write_csv_table, write_events_csv, write_events_jsonl, write_json, EventHeader, OutputError, Provenance, Sink};

#[derive(Debug, Parser)]
#[command(name = "rhp", version, about = "Renewal Hawkes process simulation, numerics and diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate replicate event streams.
    Simulate(SimulateArgs),
    /// Simulate single clusters and compare size and generation laws.
    ClusterStats(ClusterStatsArgs),
    /// Tabulate the renewal function and renewal density.
    RenewalTable(RenewalTableArgs),
    /// Evaluate probability generating functionals.
    Pgfl(PgflArgs),
    /// Run a diagnostic suite; exits 1 when it fails.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `sim.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EventFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Cluster,
    Thinning,
    Stationary,
}

impl From<MethodArg> for SimMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Cluster => SimMethod::Cluster,
            MethodArg::Thinning => SimMethod::Thinning,
            MethodArg::Stationary => SimMethod::Stationary,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Overrides `sim.reps`.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Overrides `sim.method`.
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Event format; inferred from a `.csv` extension otherwise JSONL.
    #[arg(long, value_enum)]
    pub format: Option<EventFormat>,
    /// CSV of the intensity path of replicate 0.
    #[arg(long)]
    pub intensity_out: Option<PathBuf>,
    /// Grid spacing of the intensity path; defaults to horizon / 1000.
    #[arg(long)]
    pub intensity_step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ClusterStatsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Overrides `numeric.clusters`.
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Overrides `numeric.max_generation`.
    #[arg(long)]
    pub max_generation: Option<u32>,
}

#[derive(Debug, Args)]
pub struct RenewalTableArgs {
    #[command(flatten)]
    pub common: Common,
    /// Table horizon; defaults to `sim.horizon`.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Overrides `numeric.renewal_step`.
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PgflMode {
    /// Cluster fixed point `u(x) = G_c[z_x | 0]`.
    Solver,
    /// Monte Carlo estimate of `u(0)` over simulated clusters.
    Mc,
    /// Stationary RHP through the factorial-moment expansion.
    Stationary,
    /// Renewal centre on `[0, sim.horizon]`.
    Renewal,
}

#[derive(Debug, Args)]
pub struct PgflArgs {
    #[command(flatten)]
    pub common: Common,
    /// Test function: `const:Z0`, `step:Z0:A:B` (value Z0 on [A, B)) or `tab:X=V,...`.
    #[arg(long)]
    pub z: String,
    #[arg(long, value_enum, default_value = "solver")]
    pub mode: PgflMode,
    /// Overrides `numeric.pgfl_reps`.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Overrides `numeric.k_max`.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// CSV of `u(x)` on the solver grid.
    #[arg(long)]
    pub curve_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Rescaling,
    Cross,
    Stationarity,
    Existence,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Overrides `sim.reps`.
    #[arg(long)]
    pub reps: Option<usize>,
    /// CSV plot data: QQ points, per-window KS, or the KS curve over shifts.
    #[arg(long)]
    pub plot_out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Usage(String),
    Input { path: PathBuf, message: String },
    Output(OutputError),
    Runtime(RhpError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Input { .. } => 2,
            CliError::Output(_) | CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Input { path, message } => write!(f, "{}: {message}", path.display()),
            CliError::Output(e) => write!(f, "cannot write {e}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<OutputError> for CliError {
    fn from(e: OutputError) -> Self {
        CliError::Output(e)
    }
}

impl From<RhpError> for CliError {
    fn from(e: RhpError) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult<T> = Result<T, CliError>;

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::ClusterStats(a) => cluster_stats(a),
        Command::RenewalTable(a) => table(a),
        Command::Pgfl(a) => pgfl(a),
        Command::Validate(a) => validate(a),
    }
}

fn load(common: &Common) -> CliResult<RunConfig> {
    let text = fs::read_to_string(&common.config).map_err(|e| CliError::Input {
        path: common.config.clone(),
        message: e.to_string(),
    })?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = common.seed {
        cfg.sim.seed = seed;
    }
    Ok(cfg)
}

/// Revalidates after command-line overrides.
fn finalize(cfg: RunConfig) -> CliResult<(RunConfig, RenewalModel, ExcitationKernel, Provenance)> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let kernel = cfg.kernel.build()?;
    let provenance = Provenance {
        config_hash: cfg.hash(),
        seed: cfg.sim.seed,
    };
    Ok((cfg, model, kernel, provenance))
}

fn convention_for(cfg: &RunConfig) -> Convention {
    match cfg.sim.method {
        SimMethod::Stationary => Convention::stationary(),
        _ => Convention::ordinary(cfg.sim.count_origin),
    }
}

/// Replicates in order on per-replicate substreams of the master seed.
fn simulate_streams(cfg: &RunConfig, model: &RenewalModel, kernel: &ExcitationKernel) -> CliResult<Vec<EventStream>> {
    let conv = convention_for(cfg);
    let horizon = cfg.sim.horizon;
    let method = cfg.sim.method;
    replicate(cfg.sim.reps, cfg.sim.seed, Lane::MAIN, |i, rng| {
        let s = match method {
            SimMethod::Cluster => simulate_rhp_cluster(model, kernel, horizon, &conv, rng),
            SimMethod::Thinning => simulate_rhp_thinning(model, kernel, horizon, &conv, rng),
            SimMethod::Stationary => simulate_rhp_stationary(model, kernel, horizon, rng),
        };
        s.map(|s| s.with_replicate(i))
    })
    .into_iter()
    .collect::<Result<_, _>>()
    .map_err(CliError::from)
}

fn simulate(a: SimulateArgs) -> CliResult<i32> {
    let mut cfg = load(&a.common)?;
    if let Some(r) = a.reps {
        cfg.sim.reps = r;
    }
    if let Some(m) = a.method {
        cfg.sim.method = m.into();
    }
    let (cfg, model, kernel, provenance) = finalize(cfg)?;
    let streams = simulate_streams(&cfg, &model, &kernel)?;
    let format = a.format.unwrap_or_else(|| match a.common.out.as_deref().and_then(Path::extension) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => EventFormat::Csv,
        _ => EventFormat::Jsonl,
    });
    let header = EventHeader {
        provenance: &provenance,
        method: cfg.sim.method.name(),
        horizon: cfg.sim.horizon,
        reps: cfg.sim.reps,
        count_origin: convention_for(&cfg).count_origin,
    };
    let mut sink = Sink::open(a.common.out.as_deref())?;
    match format {
        EventFormat::Jsonl => write_events_jsonl(&mut sink, &header, &streams)?,
        EventFormat::Csv => write_events_csv(&mut sink, &header, &streams)?,
    }
    sink.finish()?;

    if let Some(path) = &a.intensity_out {
        let step = a.intensity_step.unwrap_or(cfg.sim.horizon / 1000.0);
        if !(step > 0.0 && cfg.sim.horizon / step <= 1e6) {
            return Err(CliError::Usage(format!("--intensity-step must be positive and give at most 1e6 points, got {step}")));
        }
        let s = &streams[0];
        let n = (cfg.sim.horizon / step).floor() as usize;
        let mut rows = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let t = k as f64 * step;
            rows.push(vec![
                t,
                intensity_path(s, &model, &kernel, t)?,
                baseline_intensity(s, &model, t)?,
                compensator(s, &model, &kernel, t)?,
            ]);
        }
        let mut sink = Sink::open(Some(path))?;
        write_csv_table(&mut sink, &provenance, &["t", "intensity", "baseline", "compensator"], rows)?;
        sink.finish()?;
    }
    let events: usize = streams.iter().map(EventStream::len).sum();
    eprintln!("{events} events across {} replicates", streams.len());
    Ok(0)
}

#[derive(Serialize)]
struct ClusterStatsDoc {
    command: &'static str,
    #[serde(flatten)]
    stats: ClusterStats,
    pgf_residual: Option<f64>,
}

fn cluster_stats(a: ClusterStatsArgs) -> CliResult<i32> {
    let mut cfg = load(&a.common)?;
    if let Some(c) = a.clusters {
        cfg.numeric.clusters = c;
    }
    if let Some(g) = a.max_generation {
        cfg.numeric.max_generation = g;
    }
    let (cfg, _, kernel, provenance) = finalize(cfg)?;
    let alpha = kernel.kernel_mass()?;
    let trees = replicate(cfg.numeric.clusters, cfg.sim.seed, Lane::CLUSTER, |_, rng| {
        simulate_cluster(&kernel, 0.0, None, rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let stats = ClusterStats::compute(&trees, alpha, cfg.numeric.max_generation)?;
    let pgf_residual = if alpha > 0.0 {
        Some(rhp_core::cluster::cluster_size_pmf(alpha, 2000)?.pgf_residual)
    } else {
        None
    };
    let mut sink = Sink::open(a.common.out.as_deref())?;
    write_json(
        &mut sink,
        &provenance,
        &ClusterStatsDoc {
            command: "cluster-stats",
            stats,
            pgf_residual,
        },
    )?;
    sink.finish()?;
    Ok(0)
}

fn table(a: RenewalTableArgs) -> CliResult<i32> {
    let mut cfg = load(&a.common)?;
    if let Some(s) = a.step {
        cfg.numeric.renewal_step = s;
    }
    let horizon = a.horizon.unwrap_or(cfg.sim.horizon);
    let (cfg, model, _, provenance) = finalize(cfg)?;
    let t = renewal_table(&model, horizon, cfg.numeric.renewal_step)?;
    let rows = (0..t.grid.len()).map(|k| vec![t.grid[k], t.phi_fn[k], t.phi_density[k]]);
    let mut sink = Sink::open(a.common.out.as_deref())?;
    write_csv_table(&mut sink, &provenance, &["t", "Phi", "phi"], rows)?;
    sink.finish()?;
    Ok(0)
}

#[derive(Serialize)]
struct PgflDoc<T: Serialize> {
    command: &'static str,
    mode: &'static str,
    z: String,
    #[serde(flatten)]
    result: T,
}

#[derive(Serialize)]
struct SolverResult {
    u0: f64,
    tail: f64,
    residual: f64,
    iterations: usize,
    grid_points: usize,
}

#[derive(Serialize)]
struct McResult {
    estimate: f64,
    standard_error: f64,
    reps: usize,
    solver_u0: f64,
    z_score: Option<f64>,
}

#[derive(Serialize)]
struct StationaryResult {
    value: f64,
    partial_sums: Vec<f64>,
    terms: Vec<f64>,
    truncation_estimate: f64,
    converged: bool,
    /// Closed form for a Poisson centre, when the model is exponential.
    poisson_centre: Option<f64>,
}

fn pgfl(a: PgflArgs) -> CliResult<i32> {
    let mut cfg = load(&a.common)?;
    if let Some(r) = a.reps {
        cfg.numeric.pgfl_reps = r;
    }
    if let Some(k) = a.k_max {
        cfg.numeric.k_max = k;
    }
    let (cfg, model, kernel, provenance) = finalize(cfg)?;
    let z: TestFunction = a.z.parse().map_err(|e: RhpError| CliError::Usage(e.to_string()))?;
    let support = z.support_end().unwrap_or(1.0);
    let grid_step = cfg.numeric.pgfl_grid_step.unwrap_or(support / 1000.0);
    let n = &cfg.numeric;
    let solve = || solve_cluster_pgfl(&kernel, &z, n.pgfl_tol, grid_step);
    let mut sink = Sink::open(a.common.out.as_deref())?;
    let zs = z.to_string();
    let mut curve = None;
    match a.mode {
        PgflMode::Solver => {
            let s = solve()?;
            let result = SolverResult {
                u0: s.at_origin(),
                tail: s.tail,
                residual: s.residual,
                iterations: s.iterations,
                grid_points: s.grid.len(),
            };
            write_json(&mut sink, &provenance, &PgflDoc { command: "pgfl", mode: "solver", z: zs, result })?;
            curve = Some(s);
        }
        PgflMode::Mc => {
            let s = solve()?;
            let (estimate, se) = mc_pgfl_cluster(&kernel, &z, 0.0, n.pgfl_reps, cfg.sim.seed)?;
            let result = McResult {
                estimate,
                standard_error: se,
                reps: n.pgfl_reps,
                solver_u0: s.at_origin(),
                z_score: (se > 0.0).then(|| (estimate - s.at_origin()) / se),
            };
            write_json(&mut sink, &provenance, &PgflDoc { command: "pgfl", mode: "mc", z: zs, result })?;
            curve = Some(s);
        }
        PgflMode::Stationary => {
            let s = solve()?;
            let table = renewal_table(&model, s.end(), n.renewal_step.min(s.end() / 10.0))?;
            let e = stationary_pgfl_expansion(&model, &s, n.k_max, &table, n.tail_tolerance)?;
            let poisson_centre = if model.is_exponential() {
                Some(hawkes_oakes_pgfl(model.rate()?, &s)?)
            } else {
                None
            };
            let result = StationaryResult {
                value: e.value(),
                partial_sums: e.partial_sums,
                terms: e.terms,
                truncation_estimate: e.truncation_estimate,
                converged: e.converged,
                poisson_centre,
            };
            write_json(&mut sink, &provenance, &PgflDoc { command: "pgfl", mode: "stationary", z: zs, result })?;
            curve = Some(s);
        }
        PgflMode::Renewal => {
            let options = RenewalPgflOptions {
                grid_step: cfg.numeric.pgfl_grid_step,
                tail_tolerance: n.tail_tolerance,
            };
            let r = renewal_pgfl_truncated(&model, &z, cfg.sim.horizon, n.n_max, &convention_for(&cfg), options)?;
            write_json(&mut sink, &provenance, &PgflDoc { command: "pgfl", mode: "renewal", z: zs, result: r })?;
        }
    }
    sink.finish()?;
    if let Some(path) = &a.curve_out {
        let s = match curve {
            Some(s) => s,
            None => solve()?,
        };
        let mut sink = Sink::open(Some(path))?;
        let rows = s.grid.iter().zip(&s.u_values).map(|(&x, &u)| vec![x, u]);
        write_csv_table(&mut sink, &provenance, &["x", "u"], rows)?;
        sink.finish()?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    command: &'static str,
    suite: &'static str,
    #[serde(flatten)]
    report: &'a DiagnosticsReport,
}

/// Evenly spaced QQ points of the rescaled gaps against Exp(1).
fn qq_rows(mut gaps: Vec<f64>) -> Vec<Vec<f64>> {
    gaps.sort_by(f64::total_cmp);
    let n = gaps.len();
    let points = n.min(1000);
    (0..points)
        .map(|k| {
            let i = if points == 1 { 0 } else { k * (n - 1) / (points - 1) };
            let p = (i as f64 + 0.5) / n as f64;
            vec![-(-p).ln_1p(), gaps[i]]
        })
        .collect()
}

/// Column names and rows of the optional plot-data CSV.
type PlotData = (Vec<&'static str>, Vec<Vec<f64>>);

fn validate(a: ValidateArgs) -> CliResult<i32> {
    let mut cfg = load(&a.common)?;
    if let Some(r) = a.reps {
        cfg.sim.reps = r;
    }
    let (cfg, model, kernel, provenance) = finalize(cfg)?;
    let level = cfg.numeric.level;
    let seed = cfg.sim.seed;
    let (suite, report, plot): (&str, DiagnosticsReport, Option<PlotData>) = match a.suite {
        Suite::Rescaling => {
            let streams = simulate_streams(&cfg, &model, &kernel)?;
            let report = time_rescaling_test(&streams, &model, &kernel, level)?;
            let plot = a
                .plot_out
                .as_ref()
                .map(|_| rescaled_gaps(&streams, &model, &kernel).map(|g| (vec!["exp_quantile", "rescaled_gap"], qq_rows(g))))
                .transpose()?;
            ("rescaling", report, plot)
        }
        Suite::Cross => {
            if cfg.sim.method == SimMethod::Stationary {
                return Err(CliError::Usage("the cross suite compares ordinary processes; use method cluster or thinning".into()));
            }
            let scenario = Scenario {
                model,
                kernel,
                horizon: cfg.sim.horizon,
                convention: Convention::ordinary(cfg.sim.count_origin),
            };
            let windows = scenario.windows(cfg.numeric.windows);
            let report = cross_simulator_test(&scenario, cfg.sim.reps, &windows, seed, level)?;
            let rows = windows
                .iter()
                .zip(&report.detail)
                .map(|(&(lo, hi), d)| vec![lo, hi, d.statistic.unwrap_or(f64::NAN), d.p_value.unwrap_or(f64::NAN)])
                .collect();
            ("cross", report, Some((vec!["window_start", "window_end", "ks_statistic", "p_value"], rows)))
        }
        Suite::Stationarity => {
            let plain = Convention::ordinary(cfg.sim.count_origin);
            let n = &cfg.numeric;
            let report = stationarity_and_convergence(&model, &kernel, &plain, &n.shifts, n.window, cfg.sim.reps, seed, level)?;
            let rows = n
                .shifts
                .iter()
                .zip(report.details_with("plain vs stationary at shift"))
                .map(|(&t, d)| vec![t, d.statistic.unwrap_or(f64::NAN), d.threshold.unwrap_or(f64::NAN)])
                .collect();
            ("stationarity", report, Some((vec!["shift", "ks_distance", "critical_value"], rows)))
        }
        Suite::Existence => ("existence", existence_preconditions(&model, &kernel, cfg.sim.horizon), None),
    };
    let mut sink = Sink::open(a.common.out.as_deref())?;
    write_json(&mut sink, &provenance, &ReportDoc { command: "validate", suite, report: &report })?;
    sink.finish()?;
    if let (Some(path), Some((columns, rows))) = (&a.plot_out, plot) {
        let mut sink = Sink::open(Some(path))?;
        write_csv_table(&mut sink, &provenance, &columns, rows)?;
        sink.finish()?;
    }
    eprintln!("{suite}: {}", if report.pass { "pass" } else { "FAIL" });
    Ok(if report.pass { 0 } else { 1 })
}

