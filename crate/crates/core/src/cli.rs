//! The `matchci` command line: `estimate | ci | roc | protocol | simulate`.
//!
//! Every command prints one JSON document carrying the crate version, the
//! seed and the parsed configuration next to its result.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_distribution, percentile_interval, BootstrapInput, Scheme};
use crate::data_model::{CellCounts, Dissimilarity, IdentityId, MatchDataset, Metric, Setting};
use crate::error::{invalid, Error, Result};
use crate::estimators::{estimate, ErrorEstimate};
use crate::io;
use crate::protocol::{plan_far_protocol, plan_frr_protocol, ProtocolPlan};
use crate::roc::{empirical_roc_from_index, roc_interval_bootstrap_from_index, roc_interval_parametric_from_index, RocPointInterval, ScoreIndex};
use crate::synthetic::{
    calibrate_threshold, method_from_name, run_coverage_experiment, Calibration, CalibrationConfig, CoverageReport,
    NoiseScale, SyntheticConfig, Truth,
};
use crate::variance::FrrDeltaMode;
use crate::wilson::{wilson_interval, IntervalResult, WilsonMode, WilsonOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_RESAMPLING: i32 = 4;

/// Smallest bootstrap size accepted on the command line.
pub const MIN_BOOTSTRAP: usize = 100;

pub const METHODS: [&str; 6] = ["wilson", "naive-wilson", "subsets", "two-level", "vertex", "don"];

#[derive(Debug, Parser)]
#[command(name = "matchci", version, about = "Error rates and confidence intervals for matching tasks")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Random seed for resampling and simulation.
    #[arg(long, global = true, env = "MATCHCI_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Write the JSON result here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Point estimates of FRR and FAR at a threshold.
    Estimate(EstimateArgs),
    /// Confidence intervals for FRR and/or FAR at a threshold.
    Ci(CiArgs),
    /// Empirical ROC and an interval for FRR at a target FAR.
    Roc(RocArgs),
    /// Plan which comparisons to run under a budget.
    Protocol(ProtocolArgs),
    /// Coverage study on synthetic data.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DissimilarityArg {
    Euclidean,
    NormalizedEuclidean,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Score CSV: `id_a,instance_a,id_b,instance_b,score`.
    #[arg(long, conflicts_with = "embeddings", required_unless_present = "embeddings")]
    pub scores: Option<PathBuf>,

    /// Embedding CSV: `id,instance,v0,...,v{d-1}`.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,

    /// Dissimilarity used to score embeddings.
    #[arg(long, value_enum, default_value_t = DissimilarityArg::Euclidean)]
    pub dissimilarity: DissimilarityArg,

    /// Scores are similarities (large = same identity); they are negated on
    /// input and thresholds are read in the same orientation.
    #[arg(long)]
    pub similarity: bool,
}

impl InputArgs {
    fn load(&self) -> Result<MatchDataset> {
        match (&self.scores, &self.embeddings) {
            (Some(p), _) => io::load_scores(p, self.similarity),
            (None, Some(p)) => {
                let d = match self.dissimilarity {
                    DissimilarityArg::Euclidean => Dissimilarity::Euclidean,
                    DissimilarityArg::NormalizedEuclidean => Dissimilarity::NormalizedEuclidean,
                };
                let ds = io::load_embeddings(p, d)?;
                if self.similarity {
                    return Err(invalid("--similarity applies to score files only"));
                }
                Ok(ds)
            }
            (None, None) => Err(invalid("give --scores or --embeddings")),
        }
    }

    /// Threshold in internal (dissimilarity) orientation.
    fn internal(&self, t: f64) -> f64 {
        if self.similarity {
            -t
        } else {
            t
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Frr,
    Far,
    Both,
}

impl MetricArg {
    fn metrics(self) -> Vec<Metric> {
        match self {
            MetricArg::Frr => vec![Metric::Frr],
            MetricArg::Far => vec![Metric::Far],
            MetricArg::Both => vec![Metric::Frr, Metric::Far],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrrVarianceArg {
    DeltaIndependent,
    DeltaFull,
}

impl FrrVarianceArg {
    fn options(self) -> WilsonOptions {
        WilsonOptions {
            frr_mode: match self {
                FrrVarianceArg::DeltaIndependent => FrrDeltaMode::DeltaIndependent,
                FrrVarianceArg::DeltaFull => FrrDeltaMode::DeltaFull,
            },
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Decision threshold; a comparison is declared a match when its score is below it.
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CiArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Decision threshold.
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: f64,

    /// Comma-separated: wilson, naive-wilson, subsets, two-level, vertex, don.
    #[arg(long, value_delimiter = ',', default_value = "wilson")]
    pub methods: Vec<String>,

    /// Error rate(s) to bound.
    #[arg(long, value_enum, default_value_t = MetricArg::Both)]
    pub metric: MetricArg,

    /// Intervals have level 1 - alpha.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Bootstrap replicates (at least 100).
    #[arg(long, default_value_t = 1000)]
    pub b: usize,

    /// Variance estimator for FRR with unequal instance counts.
    #[arg(long, value_enum, default_value_t = FrrVarianceArg::DeltaIndependent)]
    pub frr_variance: FrrVarianceArg,

    /// Directory for bootstrap distributions, one CSV per metric and method.
    #[arg(long)]
    pub dist_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RocMethodArg {
    Parametric,
    Bootstrap,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RocArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// FAR operating point.
    #[arg(long)]
    pub target_far: f64,

    #[arg(long, value_enum, default_value_t = RocMethodArg::Parametric)]
    pub method: RocMethodArg,

    /// Bootstrap scheme for `--method bootstrap`: subsets, vertex or don.
    #[arg(long, default_value = "vertex")]
    pub scheme: String,

    /// FRR interval level is 1 - alpha.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Level of the FAR interval that sets the threshold range (default: alpha).
    #[arg(long)]
    pub alpha_far: Option<f64>,

    /// Bootstrap replicates (at least 100).
    #[arg(long, default_value_t = 1000)]
    pub b: usize,

    #[arg(long, value_enum, default_value_t = FrrVarianceArg::DeltaIndependent)]
    pub frr_variance: FrrVarianceArg,

    /// Write the empirical ROC (`threshold,frr,far`) here.
    #[arg(long)]
    pub roc_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMetricArg {
    Frr,
    Far,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProtocolArgs {
    #[arg(long, value_enum, default_value_t = PlanMetricArg::Far)]
    pub metric: PlanMetricArg,

    /// Number of comparisons to select.
    #[arg(long)]
    pub budget: usize,

    /// Instances per identity, comma separated; identities are labelled 1, 2, ...
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["identities", "scores", "embeddings"])]
    pub counts: Option<Vec<usize>>,

    /// Identity CSV: `id,instances`.
    #[arg(long, conflicts_with_all = ["scores", "embeddings"])]
    pub identities: Option<PathBuf>,

    /// Take identities and instance counts from a score CSV.
    #[arg(long, conflicts_with = "embeddings")]
    pub scores: Option<PathBuf>,

    /// Take identities and instance counts from an embedding CSV.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,

    /// Write the plan (`iteration,id_a,instance_a,id_b,instance_b`) here.
    #[arg(long)]
    pub plan_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseScaleArg {
    Variance,
    Stddev,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Identities per dataset.
    #[arg(long, default_value_t = 50)]
    pub g: usize,

    /// Instances per identity.
    #[arg(long, default_value_t = 5)]
    pub m: usize,

    /// Draw instance counts uniformly from LO..=HI instead of using --m.
    #[arg(long, value_parser = parse_range)]
    pub m_range: Option<(usize, usize)>,

    /// Embedding dimension.
    #[arg(long, default_value_t = 128)]
    pub dim: usize,

    /// Rate of the exponential identity effect.
    #[arg(long, default_value_t = 1.0)]
    pub beta_rate: f64,

    /// Noise level of the instance effect.
    #[arg(long, default_value_t = 5.0)]
    pub noise: f64,

    /// Whether --noise is a variance or a standard deviation.
    #[arg(long, value_enum, default_value_t = NoiseScaleArg::Variance)]
    pub noise_scale: NoiseScaleArg,

    /// Metric and target rate, e.g. `far=1e-2`.
    #[arg(long, value_parser = parse_target)]
    pub target: (Metric, f64),

    /// Comma-separated methods, as for `ci`.
    #[arg(long, value_delimiter = ',', default_value = "wilson,naive-wilson")]
    pub methods: Vec<String>,

    /// Replications.
    #[arg(long, default_value_t = 500)]
    pub r: usize,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Bootstrap replicates (at least 100).
    #[arg(long, default_value_t = 1000)]
    pub b: usize,

    /// Identities in each calibration dataset.
    #[arg(long, default_value_t = 200)]
    pub calib_g: usize,

    /// Instances per identity in calibration datasets.
    #[arg(long, default_value_t = 10)]
    pub calib_m: usize,

    /// Calibration datasets pooled for the true rate.
    #[arg(long, default_value_t = 1)]
    pub calib_reps: usize,

    /// Also write the per-method summary as CSV.
    #[arg(long)]
    pub summary_csv: Option<PathBuf>,

    /// Keep every replication's intervals in the JSON.
    #[arg(long)]
    pub log: bool,
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (lo, hi) = s
        .split_once([',', '-', ':'])
        .ok_or_else(|| format!("expected LO,HI, got '{s}'"))?;
    let p = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("'{x}': {e}"));
    Ok((p(lo)?, p(hi)?))
}

fn parse_target(s: &str) -> std::result::Result<(Metric, f64), String> {
    let (m, v) = s.split_once('=').ok_or_else(|| format!("expected far=RATE or frr=RATE, got '{s}'"))?;
    let metric = match m.trim().to_ascii_lowercase().as_str() {
        "far" => Metric::Far,
        "frr" => Metric::Frr,
        other => return Err(format!("unknown metric '{other}'")),
    };
    let v: f64 = v.trim().parse().map_err(|e| format!("'{v}': {e}"))?;
    Ok((metric, v))
}

/// What every command prints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub result: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub identities: usize,
    pub genuine_pairs: u64,
    pub impostor_pairs: u64,
    pub genuine_errors: u64,
    pub impostor_errors: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOutput {
    #[serde(with = "crate::serde_float")]
    pub threshold: f64,
    pub frr: Option<ErrorEstimate>,
    pub far: Option<ErrorEstimate>,
    pub counts: Counts,
    pub setting: Setting,
    pub errors: Vec<String>,
}

/// One (metric, method) cell of `ci`: an interval or why there is none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub metric: Metric,
    pub method: String,
    pub interval: Option<IntervalResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiOutput {
    #[serde(with = "crate::serde_float")]
    pub threshold: f64,
    pub results: Vec<MethodResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocOutput {
    pub roc_points: usize,
    pub interval: RocPointInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub calibration: Calibration,
    pub report: CoverageReport,
}

/// Parses a report printed by [`run`].
pub fn read_report<T: DeserializeOwned>(text: &str) -> Result<Report<T>> {
    Ok(serde_json::from_str(text)?)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Json(_) => EXIT_PARSE,
        Error::Resampling(_) => EXIT_RESAMPLING,
        Error::InvalidInput(_) | Error::Data(_) | Error::Io(_) => EXIT_CONFIG,
    }
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    let outcome = match cli.threads {
        Some(0) => Err(invalid("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| invalid(format!("cannot start thread pool: {e}")))
            .and_then(|pool| pool.install(|| dispatch(&cli))),
        None => dispatch(&cli),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("matchci: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Estimate(a) => emit(cli, "estimate", a, cmd_estimate(a)?),
        Command::Ci(a) => {
            let out = cmd_ci(a, cli.seed)?;
            if out.results.iter().all(|r| r.interval.is_none()) {
                let first = out.results.iter().find_map(|r| r.error.clone()).unwrap_or_default();
                let code = if first.starts_with("resampling failed") {
                    EXIT_RESAMPLING
                } else {
                    EXIT_CONFIG
                };
                emit(cli, "ci", a, out)?;
                eprintln!("matchci: no method produced an interval: {first}");
                return Ok(code);
            }
            emit(cli, "ci", a, out)
        }
        Command::Roc(a) => emit(cli, "roc", a, cmd_roc(a, cli.seed)?),
        Command::Protocol(a) => emit(cli, "protocol", a, cmd_protocol(a)?),
        Command::Simulate(a) => emit(cli, "simulate", a, cmd_simulate(a, cli.seed)?),
    }
}

fn emit<C: Serialize, T: Serialize>(cli: &Cli, command: &str, config: &C, result: T) -> Result<i32> {
    let report = Report {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cli.seed,
        config: serde_json::to_value(config)?,
        result,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    match &cli.output {
        Some(p) => std::fs::write(p, text).map_err(|e| io_error(p, e))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(EXIT_OK)
}

fn io_error(p: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))
}

fn create(p: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(p).map_err(|e| io_error(p, e))?))
}

fn check_alpha_arg(name: &str, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("{name} must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_methods(methods: &[String], b: usize) -> Result<()> {
    if methods.is_empty() {
        return Err(invalid("no methods given"));
    }
    for m in methods {
        if !METHODS.contains(&m.as_str()) {
            return Err(invalid(format!("unknown method '{m}'; choose from {}", METHODS.join(", "))));
        }
    }
    if methods.iter().any(|m| !m.contains("wilson")) && b < MIN_BOOTSTRAP {
        return Err(invalid(format!("bootstrap needs --b >= {MIN_BOOTSTRAP}, got {b}")));
    }
    Ok(())
}

pub fn cmd_estimate(a: &EstimateArgs) -> Result<EstimateOutput> {
    let ds = a.input.load()?;
    let counts = CellCounts::at_threshold(&ds, a.input.internal(a.threshold))?;
    let agg = counts.aggregates();
    let store = counts.outcome_store();
    let mut errors = Vec::new();
    let mut get = |m: Metric| match estimate(&agg, m) {
        Ok(e) => Some(e),
        Err(e) => {
            errors.push(format!("{m}: {e}"));
            None
        }
    };
    let frr = get(Metric::Frr);
    let far = get(Metric::Far);
    if frr.is_none() && far.is_none() {
        return Err(invalid(errors.join("; ")));
    }
    let sum = |v: &[(u64, u64)]| v.iter().fold((0, 0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let (genuine_errors, genuine_pairs) = sum(&store.within);
    let (impostor_errors, impostor_pairs) = sum(&store.row);
    Ok(EstimateOutput {
        threshold: a.threshold,
        frr,
        far,
        counts: Counts {
            identities: agg.g(),
            genuine_pairs,
            // each impostor pair appears in two rows
            impostor_pairs: impostor_pairs / 2,
            genuine_errors,
            impostor_errors: impostor_errors / 2,
        },
        setting: agg.setting(),
        errors,
    })
}

pub fn cmd_ci(a: &CiArgs, seed: u64) -> Result<CiOutput> {
    check_alpha_arg("alpha", a.alpha)?;
    check_methods(&a.methods, a.b)?;
    let ds = a.input.load()?;
    let counts = CellCounts::at_threshold(&ds, a.input.internal(a.threshold))?;
    let agg = counts.aggregates();
    let store = counts.outcome_store();
    if let Some(dir) = &a.dist_dir {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    let mut results = Vec::new();
    for metric in a.metric.metrics() {
        for method in &a.methods {
            let r = match method.as_str() {
                "wilson" => wilson_interval(metric, &agg, WilsonMode::Adjusted, a.alpha, a.frr_variance.options()),
                "naive-wilson" => wilson_interval(metric, &agg, WilsonMode::Naive, a.alpha, a.frr_variance.options()),
                other => other.parse::<Scheme>().and_then(|scheme| {
                    let input = BootstrapInput::with_store(&agg, &store);
                    let dist = bootstrap_distribution(input, scheme, metric, a.b, seed)?;
                    if let Some(dir) = &a.dist_dir {
                        let p = dir.join(format!("{metric}_{other}.csv"));
                        dist.write_csv(create(&p)?)?;
                    }
                    let mut iv = percentile_interval(&dist, a.alpha)?;
                    iv.point = estimate(&agg, metric)?.value;
                    iv.method = other.to_string();
                    Ok(iv)
                }),
            };
            results.push(match r {
                Ok(iv) => MethodResult {
                    metric,
                    method: method.clone(),
                    interval: Some(iv),
                    error: None,
                },
                Err(e) => MethodResult {
                    metric,
                    method: method.clone(),
                    interval: None,
                    error: Some(e.to_string()),
                },
            });
        }
    }
    Ok(CiOutput {
        threshold: a.threshold,
        results,
    })
}

pub fn cmd_roc(a: &RocArgs, seed: u64) -> Result<RocOutput> {
    check_alpha_arg("alpha", a.alpha)?;
    let alpha_far = a.alpha_far.unwrap_or(a.alpha);
    check_alpha_arg("alpha-far", alpha_far)?;
    if !(0.0..=1.0).contains(&a.target_far) {
        return Err(invalid(format!("target FAR {} outside [0, 1]", a.target_far)));
    }
    let scheme: Scheme = a.scheme.parse()?;
    if a.method == RocMethodArg::Bootstrap && a.b < MIN_BOOTSTRAP {
        return Err(invalid(format!("bootstrap needs --b >= {MIN_BOOTSTRAP}, got {}", a.b)));
    }
    let ds = a.input.load()?;
    let idx = ScoreIndex::new(&ds)?;
    let mut roc = empirical_roc_from_index(&idx)?;
    let mut interval = match a.method {
        RocMethodArg::Parametric => {
            roc_interval_parametric_from_index(&idx, a.target_far, a.alpha, alpha_far, a.frr_variance.options())?
        }
        RocMethodArg::Bootstrap => roc_interval_bootstrap_from_index(&idx, a.target_far, a.alpha, scheme, a.b, seed)?,
    };
    if a.input.similarity {
        for t in &mut roc.thresholds {
            *t = -*t;
        }
        interval.threshold_used = -interval.threshold_used;
    }
    if let Some(p) = &a.roc_csv {
        roc.write_csv(create(p)?)?;
    }
    Ok(RocOutput {
        roc_points: roc.len(),
        interval,
    })
}

pub fn cmd_protocol(a: &ProtocolArgs) -> Result<ProtocolPlan> {
    let units: Vec<(IdentityId, usize)> = if let Some(c) = &a.counts {
        c.iter().enumerate().map(|(i, &m)| (IdentityId((i + 1).to_string()), m)).collect()
    } else if let Some(p) = &a.identities {
        io::load_identity_counts(p)?
    } else {
        let ds = match (&a.scores, &a.embeddings) {
            (Some(p), _) => io::load_scores(p, false)?,
            (None, Some(p)) => io::load_embeddings(p, Dissimilarity::Euclidean)?,
            (None, None) => return Err(invalid("give --counts, --identities, --scores or --embeddings")),
        };
        ds.identities().iter().cloned().zip(ds.instance_counts()).collect()
    };
    let plan = match a.metric {
        PlanMetricArg::Far => plan_far_protocol(&units, a.budget)?,
        PlanMetricArg::Frr => plan_frr_protocol(&units, a.budget)?,
    };
    if let Some(p) = &a.plan_csv {
        plan.write_csv(create(p)?)?;
    }
    Ok(plan)
}

pub fn cmd_simulate(a: &SimulateArgs, seed: u64) -> Result<SimulateOutput> {
    check_alpha_arg("alpha", a.alpha)?;
    check_methods(&a.methods, a.b)?;
    let (metric, target) = a.target;
    if !(target > 0.0 && target < 1.0) {
        return Err(invalid(format!("target rate must lie in (0, 1), got {target}")));
    }
    let model = SyntheticConfig {
        g: a.g,
        m: a.m,
        m_range: a.m_range,
        dim: a.dim,
        beta_rate: a.beta_rate,
        noise_param: a.noise,
        noise_scale: match a.noise_scale {
            NoiseScaleArg::Variance => NoiseScale::Variance,
            NoiseScaleArg::Stddev => NoiseScale::Stddev,
        },
        seed,
    };
    model.validate()?;
    let calib = CalibrationConfig {
        g: a.calib_g,
        m: a.calib_m,
        reps: a.calib_reps,
    };
    let calibration = calibrate_threshold(&model, &calib, metric, target)?;
    for w in &calibration.warnings {
        log::warn!("{w}");
    }
    let methods = a.methods.iter().map(|m| method_from_name(m, a.b)).collect::<Result<Vec<_>>>()?;
    let report = run_coverage_experiment(
        &model,
        calibration.threshold,
        Truth {
            metric,
            value: calibration.truth,
        },
        &methods,
        a.alpha,
        a.r,
        a.log,
    )?;
    if let Some(p) = &a.summary_csv {
        report.write_csv(create(p)?)?;
    }
    Ok(SimulateOutput { calibration, report })
}
