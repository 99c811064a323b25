//! Experiment configuration, orchestration and persistence for the CLI.
//!
//! Every command computes all of its artifacts in memory first and writes them
//! afterwards, each through a temporary file renamed into place, so a failing
//! command leaves no partial output behind.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::value::RawValue;
use serde_json::{json, Map, Value};

use crate::adversary::{self, SegmentedDesign, SpacingRule};
use crate::baselines::{ogd_run, KtPredictor, LearningRate};
use crate::bounds::{self, BoundQuery};
use crate::comparator::{best_comparator, project, Norm, NormConstraint};
use crate::error::{Error, Result};
use crate::logistic::{cumulative_loss, sigmoid, Label, LabeledExample, ParamVector, RegretTrace};
use crate::mixture::{self, ParamGrid, PriorSpec, DEFAULT_CARDINALITY_CAP};
use crate::online::run_predictor;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "REGRETLAB_THREADS";

const SOLVER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Bounds,
    Distinguish,
    Capacity,
    Sweep,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Bounds => "bounds",
            Command::Distinguish => "distinguish",
            Command::Capacity => "capacity",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    GridMixture,
    GaussianMixture,
    Kt,
    Ogd,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::GridMixture => "grid-mixture",
            Algorithm::GaussianMixture => "gaussian-mixture",
            Algorithm::Kt => "kt",
            Algorithm::Ogd => "ogd",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "grid-mixture" | "grid_mixture" | "grid" => Ok(Algorithm::GridMixture),
            "gaussian-mixture" | "gaussian_mixture" | "gaussian" => Ok(Algorithm::GaussianMixture),
            "kt" => Ok(Algorithm::Kt),
            "ogd" => Ok(Algorithm::Ogd),
            other => Err(Error::Config(format!(
                "unknown algorithm {other:?} (expected grid-mixture, gaussian-mixture, kt or ogd)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format {other:?} (expected csv or json)"))),
        }
    }
}

/// Optional settings from one source (flags or a config file).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub algorithm: Option<Algorithm>,
    pub norm: Option<Norm>,
    pub radius: Option<f64>,
    pub d: Option<usize>,
    pub horizon: Option<usize>,
    pub spacing: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub eps_exponent: Option<f64>,
    pub gamma_levels: Option<usize>,
    pub grid_points: Option<usize>,
    pub bits: Option<bool>,
    pub d_list: Option<Vec<usize>>,
    pub t_list: Option<Vec<usize>>,
    pub b_list: Option<Vec<f64>>,
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("cannot parse {key} = {v:?}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

impl Overrides {
    /// Parses `key = value` lines; blank lines and `#` comments are ignored.
    pub fn from_config_text(text: &str) -> Result<Self> {
        let mut o = Overrides::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            let key = k.trim().trim_start_matches("--").replace('_', "-");
            let v = v.trim();
            match key.as_str() {
                "alg" | "algorithm" => o.algorithm = Some(v.parse()?),
                "norm" => o.norm = Some(v.parse()?),
                "B" | "b" | "radius" => o.radius = Some(parse_value(&key, v)?),
                "d" => o.d = Some(parse_value(&key, v)?),
                "T" | "t" | "horizon" => o.horizon = Some(parse_value(&key, v)?),
                "spacing" => o.spacing = Some(parse_value(&key, v)?),
                "trials" => o.trials = Some(parse_value(&key, v)?),
                "seed" => o.seed = Some(parse_value(&key, v)?),
                "format" => o.format = Some(v.parse()?),
                "eps-exponent" => o.eps_exponent = Some(parse_value(&key, v)?),
                "gamma-levels" => o.gamma_levels = Some(parse_value(&key, v)?),
                "grid-points" => o.grid_points = Some(parse_value(&key, v)?),
                "bits" => o.bits = Some(parse_value(&key, v)?),
                "d-list" => o.d_list = Some(parse_list(&key, v)?),
                "t-list" | "T-list" => o.t_list = Some(parse_list(&key, v)?),
                "b-list" | "B-list" => o.b_list = Some(parse_list(&key, v)?),
                other => return Err(Error::Config(format!("line {}: unknown key {other:?}", n + 1))),
            }
        }
        Ok(o)
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_config_text(&text)
    }

    /// Fields set in `self` win; the rest come from `lower`.
    pub fn or(self, lower: Overrides) -> Overrides {
        Overrides {
            algorithm: self.algorithm.or(lower.algorithm),
            norm: self.norm.or(lower.norm),
            radius: self.radius.or(lower.radius),
            d: self.d.or(lower.d),
            horizon: self.horizon.or(lower.horizon),
            spacing: self.spacing.or(lower.spacing),
            trials: self.trials.or(lower.trials),
            seed: self.seed.or(lower.seed),
            format: self.format.or(lower.format),
            eps_exponent: self.eps_exponent.or(lower.eps_exponent),
            gamma_levels: self.gamma_levels.or(lower.gamma_levels),
            grid_points: self.grid_points.or(lower.grid_points),
            bits: self.bits.or(lower.bits),
            d_list: self.d_list.or(lower.d_list),
            t_list: self.t_list.or(lower.t_list),
            b_list: self.b_list.or(lower.b_list),
        }
    }
}

/// A fully resolved command.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub algorithm: Algorithm,
    pub norm: Norm,
    pub radius: f64,
    pub d: usize,
    pub horizon: usize,
    pub spacing: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub output_path: PathBuf,
    pub format: Format,
    pub eps_exponent: f64,
    pub gamma_levels: Option<usize>,
    pub grid_points: Option<usize>,
    pub bits: bool,
    pub d_list: Vec<usize>,
    pub t_list: Vec<usize>,
    pub b_list: Vec<f64>,
}

impl ExperimentConfig {
    /// Applies defaults beneath `settings` (already merged flags over file).
    pub fn resolve(command: Command, output_path: Option<PathBuf>, settings: Overrides) -> Result<Self> {
        let default_format = match command {
            Command::Run | Command::Sweep => Format::Csv,
            _ => Format::Json,
        };
        let format = settings.format.unwrap_or(default_format);
        let d = settings.d.unwrap_or(1);
        let horizon = settings.horizon.unwrap_or(100);
        let radius = settings.radius.unwrap_or(1.0);
        let cfg = Self {
            command,
            algorithm: settings.algorithm.unwrap_or(Algorithm::GridMixture),
            norm: settings.norm.unwrap_or(Norm::L2),
            radius,
            d,
            horizon,
            spacing: settings.spacing,
            trials: settings.trials.unwrap_or(1000),
            seed: settings.seed.unwrap_or(0),
            output_path: output_path.unwrap_or_else(|| PathBuf::from(format!("{}.{}", command.as_str(), format.ext()))),
            format,
            eps_exponent: settings.eps_exponent.unwrap_or(0.0),
            gamma_levels: settings.gamma_levels,
            grid_points: settings.grid_points,
            bits: settings.bits.unwrap_or(false),
            d_list: settings.d_list.unwrap_or_else(|| vec![d]),
            t_list: settings.t_list.unwrap_or_else(|| vec![horizon]),
            b_list: settings.b_list.unwrap_or_else(|| vec![radius]),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d_list.contains(&0) {
            return Err(Error::InvalidArgument("d must be at least 1".into()));
        }
        if self.horizon == 0 || self.t_list.contains(&0) {
            return Err(Error::InvalidArgument("T must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if let Some(s) = self.spacing {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(format!("spacing must be positive, got {s}")));
            }
        }
        if self.d_list.is_empty() || self.t_list.is_empty() || self.b_list.is_empty() {
            return Err(Error::InvalidArgument("sweep lists must be nonempty".into()));
        }
        NormConstraint::new(self.norm, self.radius)?;
        Ok(())
    }

    fn constraint(&self) -> Result<NormConstraint> {
        NormConstraint::new(self.norm, self.radius)
    }
}

/// A file to be written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub path: PathBuf,
    pub contents: String,
}

/// Sets the global worker count from [`THREADS_ENV`] if present.
pub fn init_thread_pool() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs a command and returns its artifacts without touching the file system.
pub fn execute(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    match cfg.command {
        Command::Run => command_run(cfg),
        Command::Bounds => command_bounds(cfg),
        Command::Distinguish => command_distinguish(cfg),
        Command::Capacity => command_capacity(cfg),
        Command::Sweep => command_sweep(cfg),
    }
}

/// Computes and writes a command's artifacts.
pub fn cli_run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let artifacts = execute(cfg)?;
    write_artifacts(&artifacts)?;
    Ok(artifacts.into_iter().map(|a| a.path).collect())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp-{}", std::process::id()));
    path.with_file_name(name)
}

/// Writes every artifact to a temporary sibling, then renames them all into
/// place. On failure the temporaries are removed.
pub fn write_artifacts(artifacts: &[Artifact]) -> Result<()> {
    let mut staged: Vec<(PathBuf, &Path)> = Vec::new();
    let result = (|| {
        for a in artifacts {
            let tmp = temp_path(&a.path);
            fs::write(&tmp, &a.contents).map_err(io_err(&a.path))?;
            staged.push((tmp, &a.path));
        }
        for (tmp, dst) in &staged {
            fs::rename(tmp, dst).map_err(io_err(dst))?;
        }
        Ok(())
    })();
    if result.is_err() {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
    }
    result
}

/// `{:.16e}`: 17 significant digits, enough to round-trip any f64.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn json_float(v: f64) -> Box<RawValue> {
    let s = if v.is_finite() { fmt_float(v) } else { "null".into() };
    RawValue::from_string(s).expect("formatted float is valid JSON")
}

pub const TRACE_HEADER: &str = "round,alg_loss_nats,comparator_loss_nats,cum_regret_nats";

pub fn trace_csv(trace: &RegretTrace) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for i in 0..trace.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            i + 1,
            fmt_float(trace.per_round_alg_loss[i]),
            fmt_float(trace.per_round_comparator_loss[i]),
            fmt_float(trace.cumulative_regret[i])
        );
    }
    out
}

#[derive(Serialize)]
struct TraceRow {
    round: usize,
    alg_loss_nats: Box<RawValue>,
    comparator_loss_nats: Box<RawValue>,
    cum_regret_nats: Box<RawValue>,
}

pub fn trace_json(trace: &RegretTrace) -> String {
    let rows: Vec<TraceRow> = (0..trace.len())
        .map(|i| TraceRow {
            round: i + 1,
            alg_loss_nats: json_float(trace.per_round_alg_loss[i]),
            comparator_loss_nats: json_float(trace.per_round_comparator_loss[i]),
            cum_regret_nats: json_float(trace.cumulative_regret[i]),
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&rows).expect("trace rows serialize");
    s.push('\n');
    s
}

pub fn render_trace(trace: &RegretTrace, format: Format) -> String {
    match format {
        Format::Csv => trace_csv(trace),
        Format::Json => trace_json(trace),
    }
}

/// Writes a trace to `path` in `format`.
pub fn emit_trace(trace: &RegretTrace, path: &Path, format: Format) -> Result<()> {
    write_artifacts(&[Artifact {
        path: path.to_path_buf(),
        contents: render_trace(trace, format),
    }])
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

fn csv_field(v: &Value) -> String {
    let s = match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => fmt_float(f),
            _ => n.to_string(),
        },
        other => other.to_string(),
    };
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        other => out.push((prefix.to_string(), other.clone())),
    }
}

/// Long-format CSV of records sharing the same keys.
fn records_csv(records: &[Value]) -> String {
    let rows: Vec<Vec<(String, Value)>> = records
        .iter()
        .map(|r| {
            let mut cols = Vec::new();
            flatten("", r, &mut cols);
            cols
        })
        .collect();
    let mut out = String::new();
    if let Some(first) = rows.first() {
        let header: Vec<&str> = first.iter().map(|c| c.0.as_str()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
    }
    for r in &rows {
        let line: Vec<String> = r.iter().map(|c| csv_field(&c.1)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn render_record(v: &Value, format: Format) -> String {
    match format {
        Format::Json => pretty(v),
        Format::Csv => records_csv(std::slice::from_ref(v)),
    }
}

fn summary_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".summary.json");
    out.with_file_name(name)
}

/// Random sequence for `run`: a generating parameter drawn uniformly from the
/// cube and projected onto the ball, uniform features, Bernoulli labels.
pub fn generate_sequence(
    d: usize,
    horizon: usize,
    constraint: &NormConstraint,
    seed: u64,
) -> Result<(ParamVector, Vec<LabeledExample>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = constraint.radius();
    let raw = ParamVector::new((0..d).map(|_| rng.gen_range(-b..=b)).collect())?;
    let theta = project(&raw, constraint);
    let mut s = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let p = sigmoid(theta.dot(&x)?);
        let y = if rng.gen::<f64>() < p { Label::Pos } else { Label::Neg };
        s.push(LabeledExample::new(x, y)?);
    }
    Ok((theta, s))
}

fn featureless_sequence(horizon: usize, seed: u64) -> Result<Vec<LabeledExample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: f64 = rng.gen();
    (0..horizon)
        .map(|_| {
            let y = if rng.gen::<f64>() < p { Label::Pos } else { Label::Neg };
            LabeledExample::new(vec![1.0], y)
        })
        .collect()
}

struct RunOutcome {
    trace: RegretTrace,
    summary: Value,
}

fn spacing_for(cfg_spacing: Option<f64>, horizon: usize) -> Result<f64> {
    match cfg_spacing {
        Some(s) => Ok(s),
        None => mixture::default_spacing(horizon),
    }
}

fn upper_formula(norm: Norm, d: usize, horizon: usize, radius: f64) -> Value {
    match BoundQuery::new(norm, d, horizon as f64, radius).and_then(|q| bounds::upper_bound(&q)) {
        Ok(b) => json!({ "region": b.region.as_str(), "nats": b.nats }),
        Err(_) => Value::Null,
    }
}

fn run_one(
    algorithm: Algorithm,
    norm: Norm,
    radius: f64,
    d: usize,
    horizon: usize,
    spacing: Option<f64>,
    seed: u64,
) -> Result<RunOutcome> {
    let constraint = NormConstraint::new(norm, radius)?;
    if algorithm == Algorithm::Kt {
        if d != 1 {
            return Err(Error::InvalidArgument("the kt baseline is defined for d = 1 only".into()));
        }
        let s = featureless_sequence(horizon, seed)?;
        let labels: Vec<Label> = s.iter().map(|e| e.label()).collect();
        let trace = crate::baselines::kt_run(&labels);
        let summary = json!({
            "algorithm": algorithm.as_str(),
            "d": d,
            "T": horizon,
            "seed": seed,
            "final_regret": trace.final_regret(),
            "comparator_loss": trace.total_comparator_loss(),
            "theorem2_bound": Value::Null,
            "upper_bound_formula": Value::Null,
        });
        return Ok(RunOutcome { trace, summary });
    }

    let (theta_gen, s) = generate_sequence(d, horizon, &constraint, seed)?;
    let best = if s.is_empty() {
        None
    } else {
        Some(best_comparator(&s, &constraint, SOLVER_TOL)?)
    };
    let comparator = best.as_ref().map(|b| b.theta_star.clone()).unwrap_or_else(|| ParamVector::zeros(d));
    let mut summary = json!({
        "algorithm": algorithm.as_str(),
        "norm": norm.as_str(),
        "B": radius,
        "d": d,
        "T": horizon,
        "seed": seed,
        "theta_generating": theta_gen.as_slice(),
        "comparator": comparator.as_slice(),
        "comparator_converged": best.as_ref().map(|b| b.converged).unwrap_or(true),
        "upper_bound_formula": upper_formula(norm, d, horizon, radius),
        "theorem2_bound": Value::Null,
    });
    let trace = match algorithm {
        Algorithm::GridMixture | Algorithm::GaussianMixture => {
            let (prior, eps) = if algorithm == Algorithm::GridMixture {
                (PriorSpec::uniform(), spacing_for(spacing, horizon)?)
            } else {
                let nu2 = bounds::gaussian_prior_variance(&constraint, d)?;
                let eps = match spacing {
                    Some(e) => e,
                    None => bounds::gaussian_spacing_sq(nu2, horizon as f64).sqrt(),
                };
                summary["gaussian_variance"] = json!(nu2);
                (PriorSpec::quantized_gaussian(nu2), eps)
            };
            let grid = mixture::build_grid(d, &constraint, eps)?;
            let (trace, _) = mixture::run_online(&grid, &prior, &s, &comparator)?;
            summary["spacing"] = json!(eps);
            summary["grid_cardinality"] = json!(grid.len());
            if algorithm == Algorithm::GridMixture {
                summary["theorem2_bound"] = json!(bounds::theorem2_instance_bound(grid.len(), d, horizon, eps)?);
            }
            trace
        }
        Algorithm::Ogd => ogd_run(&s, &constraint, LearningRate::default(), &comparator)?.0,
        Algorithm::Kt => unreachable!("handled above"),
    };
    summary["final_regret"] = json!(trace.final_regret());
    summary["comparator_loss"] = json!(cumulative_loss(&comparator, &s)?);
    Ok(RunOutcome { trace, summary })
}

fn command_run(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let out = run_one(cfg.algorithm, cfg.norm, cfg.radius, cfg.d, cfg.horizon, cfg.spacing, cfg.seed)?;
    Ok(vec![
        Artifact {
            path: cfg.output_path.clone(),
            contents: render_trace(&out.trace, cfg.format),
        },
        Artifact {
            path: summary_path(&cfg.output_path),
            contents: pretty(&out.summary),
        },
    ])
}

fn bounds_value(cfg: &ExperimentConfig, d: usize, horizon: usize, radius: f64) -> Result<Value> {
    let q = BoundQuery::new(cfg.norm, d, horizon as f64, radius)?.with_eps_exponent(cfg.eps_exponent)?;
    let r = bounds::bound_report(&q)?;
    let mut v = serde_json::to_value(&r).expect("report serializes");
    if cfg.bits {
        v["lower_bits"] = json!(bounds::nats_to_bits(r.lower_nats));
        v["upper_bits"] = json!(bounds::nats_to_bits(r.upper_nats));
    }
    Ok(v)
}

fn command_bounds(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let v = bounds_value(cfg, cfg.d, cfg.horizon, cfg.radius)?;
    Ok(vec![Artifact {
        path: cfg.output_path.clone(),
        contents: render_record(&v, cfg.format),
    }])
}

/// Probability-spaced grid with `n` values per coordinate: `p = j / (n - 1)`,
/// clipped to `[1/(2T), 1 - 1/(2T)]`.
pub fn probability_grid(d: usize, points_per_dim: usize, horizon: usize) -> Result<ParamGrid> {
    if points_per_dim < 2 {
        return Err(Error::InvalidArgument("need at least 2 grid values per coordinate".into()));
    }
    let floor = 1.0 / (2.0 * horizon.max(1) as f64);
    let axis: Vec<f64> = (0..points_per_dim)
        .map(|j| {
            let p = (j as f64 / (points_per_dim - 1) as f64).clamp(floor, 1.0 - floor);
            (p / (1.0 - p)).ln()
        })
        .collect();
    ParamGrid::product(vec![axis; d], DEFAULT_CARDINALITY_CAP)
}

fn design_and_grid(cfg: &ExperimentConfig) -> Result<(SegmentedDesign, ParamGrid)> {
    let design = adversary::build_design(cfg.d, cfg.horizon, cfg.gamma_levels)?;
    let grid = match cfg.grid_points {
        Some(n) if cfg.gamma_levels.is_none() => probability_grid(cfg.d, n, cfg.horizon)?,
        Some(_) => {
            return Err(Error::InvalidArgument(
                "--grid-points applies to the plain design only".into(),
            ))
        }
        None => adversary::build_theory_grid(&design, SpacingRule::Probability, cfg.eps_exponent)?,
    };
    Ok((design, grid))
}

fn command_distinguish(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let (design, grid) = design_and_grid(cfg)?;
    let report = adversary::estimate_pe(&design, &grid, cfg.trials, cfg.seed)?;
    let v = serde_json::to_value(&report).expect("report serializes");
    Ok(vec![Artifact {
        path: cfg.output_path.clone(),
        contents: render_record(&v, cfg.format),
    }])
}

fn command_capacity(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let (design, grid) = design_and_grid(cfg)?;
    let constraint = cfg.constraint()?;
    let report = match cfg.algorithm {
        Algorithm::GridMixture => adversary::capacity_experiment(
            |s, th| mixture::run_online(&grid, &PriorSpec::uniform(), s, th).map(|r| r.0),
            &design,
            &grid,
            cfg.trials,
            cfg.seed,
        )?,
        Algorithm::Kt => {
            if cfg.d != 1 {
                return Err(Error::InvalidArgument("the kt baseline is defined for d = 1 only".into()));
            }
            adversary::capacity_experiment(
                |s, th| run_predictor(&mut KtPredictor::default(), s, th),
                &design,
                &grid,
                cfg.trials,
                cfg.seed,
            )?
        }
        Algorithm::Ogd => adversary::capacity_experiment(
            |s, th| ogd_run(s, &constraint, LearningRate::default(), th).map(|r| r.0),
            &design,
            &grid,
            cfg.trials,
            cfg.seed,
        )?,
        Algorithm::GaussianMixture => {
            return Err(Error::Unsupported(
                "capacity runs use the uniform mixture on the design grid; choose grid-mixture".into(),
            ))
        }
    };
    let mut v = serde_json::to_value(&report).expect("report serializes");
    v["algorithm"] = json!(cfg.algorithm.as_str());
    Ok(vec![Artifact {
        path: cfg.output_path.clone(),
        contents: render_record(&v, cfg.format),
    }])
}

fn sweep_cell(cfg: &ExperimentConfig, d: usize, horizon: usize, radius: f64) -> Value {
    let mut row = Map::new();
    row.insert("d".into(), json!(d));
    row.insert("T".into(), json!(horizon));
    row.insert("B".into(), json!(radius));
    let run = run_one(cfg.algorithm, cfg.norm, radius, d, horizon, cfg.spacing, cfg.seed);
    let bounds = bounds_value(cfg, d, horizon, radius);
    let (status, message) = match (&run, &bounds) {
        (Ok(_), Ok(_)) => ("ok".to_string(), Value::Null),
        (Err(e), _) | (_, Err(e)) => (e.kind().to_string(), json!(e.to_string())),
    };
    row.insert("status".into(), json!(status));
    let get = |v: &Value, k: &str| v.get(k).cloned().unwrap_or(Value::Null);
    let summary = run.as_ref().map(|r| r.summary.clone()).unwrap_or(Value::Null);
    row.insert("grid_cardinality".into(), get(&summary, "grid_cardinality"));
    row.insert("final_regret".into(), get(&summary, "final_regret"));
    row.insert("theorem2_bound".into(), get(&summary, "theorem2_bound"));
    let b = bounds.unwrap_or(Value::Null);
    for k in ["gamma", "table_row", "lower_region", "lower_nats", "upper_region", "upper_nats"] {
        row.insert(k.into(), get(&b, k));
    }
    row.insert("message".into(), message);
    Value::Object(row)
}

fn command_sweep(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let mut cells = Vec::new();
    for &d in &cfg.d_list {
        for &t in &cfg.t_list {
            for &b in &cfg.b_list {
                cells.push((d, t, b));
            }
        }
    }
    let rows: Vec<Value> = cells
        .par_iter()
        .map(|&(d, t, b)| sweep_cell(cfg, d, t, b))
        .collect();
    let contents = match cfg.format {
        Format::Csv => records_csv(&rows),
        Format::Json => pretty(&Value::Array(rows)),
    };
    Ok(vec![Artifact {
        path: cfg.output_path.clone(),
        contents,
    }])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(n: usize) -> RegretTrace {
        let alg: Vec<f64> = (0..n).map(|i| 0.1 * (i as f64 + 1.0)).collect();
        let comp = vec![0.05; n];
        RegretTrace::from_losses(alg, comp, crate::logistic::ComparatorRef::Param(ParamVector::zeros(1)))
    }

    #[test]
    fn csv_shapes() {
        assert_eq!(trace_csv(&trace(0)), format!("{TRACE_HEADER}\n"));
        let s = trace_csv(&trace(3));
        assert_eq!(s.lines().count(), 4);
        assert!(s.lines().nth(1).unwrap().starts_with("1,"));
    }

    #[test]
    fn json_round_trip() {
        let t = trace(5);
        let v: Value = serde_json::from_str(&trace_json(&t)).unwrap();
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 5);
        for (r, c) in rows.iter().zip(&t.cumulative_regret) {
            assert!((r["cum_regret_nats"].as_f64().unwrap() - c).abs() <= 1e-15);
        }
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789, 0.0] {
            assert_eq!(fmt_float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn config_text() {
        let o = Overrides::from_config_text("# comment\nnorm = l1\nB=2.5\nT = 64\nd-list = 1, 2,3\nalg=kt\n").unwrap();
        assert_eq!(o.norm, Some(Norm::L1));
        assert_eq!(o.radius, Some(2.5));
        assert_eq!(o.horizon, Some(64));
        assert_eq!(o.d_list, Some(vec![1, 2, 3]));
        assert_eq!(o.algorithm, Some(Algorithm::Kt));
        assert!(Overrides::from_config_text("bogus = 1").is_err());
        assert!(Overrides::from_config_text("d").is_err());
    }

    #[test]
    fn precedence() {
        let flags = Overrides {
            d: Some(3),
            ..Default::default()
        };
        let file = Overrides {
            d: Some(2),
            horizon: Some(50),
            ..Default::default()
        };
        let cfg = ExperimentConfig::resolve(Command::Run, None, flags.or(file)).unwrap();
        assert_eq!((cfg.d, cfg.horizon, cfg.radius), (3, 50, 1.0));
        assert_eq!(cfg.output_path, PathBuf::from("run.csv"));
    }

    #[test]
    fn run_rows_and_bound() {
        let cfg = ExperimentConfig::resolve(
            Command::Run,
            Some("x.csv".into()),
            Overrides {
                norm: Some(Norm::L1),
                d: Some(1),
                horizon: Some(16),
                seed: Some(7),
                ..Default::default()
            },
        )
        .unwrap();
        let a = execute(&cfg).unwrap();
        assert_eq!(a[0].contents.lines().count(), 17);
        let summary: Value = serde_json::from_str(&a[1].contents).unwrap();
        let regret = summary["final_regret"].as_f64().unwrap();
        let bound = summary["theorem2_bound"].as_f64().unwrap();
        assert!(regret <= bound + 1e-6);
        assert_eq!(a[1].path, PathBuf::from("x.summary.json"));
    }

    #[test]
    fn sweep_marks_infeasible_cells() {
        let cfg = ExperimentConfig::resolve(
            Command::Sweep,
            None,
            Overrides {
                norm: Some(Norm::Linf),
                d_list: Some(vec![1, 12]),
                t_list: Some(vec![16]),
                ..Default::default()
            },
        )
        .unwrap();
        let a = execute(&cfg).unwrap();
        let lines: Vec<&str> = a[0].contents.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].contains(",ok,"));
        assert!(lines[2].contains("cardinality_cap"));
    }
}
