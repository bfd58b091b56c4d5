//! Command-line front end: `design`, `simulate`, `estimate`, `benchmark`,
//! `bias-predict` and `basis-check`.
//!
//! Every subcommand reads a JSON config, resolves it (design files referenced
//! by path are inlined, command-line overrides applied), hashes the resolved
//! config with SHA-256 and embeds the hash in everything it writes.
//!
//! Exit codes: 0 success, 1 config/IO/validation error, 2 infeasible design
//! or degenerate delay system, 3 estimation failure (all methods failed,
//! a benchmark method failed on more than half the replicates, or a basis
//! check did not pass).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use schemars::JsonSchema;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::analysis::{
    predict_bias_tau, run_monte_carlo, BenchmarkConfig, BiasPrediction, BiasPredictionConfig, McStats,
};
use crate::basis::{check_basis, BasisCheck, BasisConfig};
use crate::design::{optimize_design, DesignOutcome, DesignProblem};
use crate::error::{invalid, Error, Result};
use crate::estimators::{
    crlb, CrlbReport, DelayEstimate, DelayEstimator, FreqInterpConfig, FreqInterpEstimator, LagSplineEstimator, Method,
    MlConfig, MlEstimator, ProposedEstimator,
};
use crate::signal::{n_samples_for, simulate, Dataset, DatasetMeta, InputDesign};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_ESTIMATION: i32 = 3;

/// Relative tolerance on the sampled basis used by `basis-check`.
const BASIS_CHECK_TOL: f64 = 1e-9;
/// Benchmarks fail when a method fails on more than this share of replicates.
const MAX_FAILURE_RATE: f64 = 0.5;

#[derive(Debug, Parser)]
#[command(name = "lagdelay", version, about = "Subsample time-delay estimation in the Laguerre domain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON config file for the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for Monte-Carlo runs.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,

    /// Comma-separated estimators: proposed, ml, lag_spline, freq_interp or all.
    #[arg(long, global = true)]
    pub methods: Option<String>,

    /// Overrides the replicate count in the config.
    #[arg(long, global = true)]
    pub replicates: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Optimize the Laguerre parameter and input spectrum.
    Design,
    /// Sample the delayed input and add noise.
    Simulate,
    /// Estimate the delay from a dataset.
    Estimate,
    /// Seeded Monte-Carlo comparison of the estimators.
    Benchmark,
    /// Predict the bias of the proposed estimator.
    BiasPredict,
    /// Check the sampled basis against the analytic functions.
    BasisCheck,
}

/// Failure carrying the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible(_) | Error::DegenerateB { .. } => EXIT_INFEASIBLE,
            _ => EXIT_CONFIG,
        };
        Self::new(code, e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<i32> {
    fs::create_dir_all(&cli.out).map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", cli.out.display())))?;
    match cli.command {
        Command::Design => cmd_design(cli),
        Command::Simulate => cmd_simulate(cli),
        Command::Estimate => cmd_estimate(cli),
        Command::Benchmark => cmd_benchmark(cli),
        Command::BiasPredict => cmd_bias_predict(cli),
        Command::BasisCheck => cmd_basis_check(cli),
    }
}

// ── Config loading ──────────────────────────────────────────────────────

/// SHA-256 of the canonical JSON serialization, hex encoded.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

fn json_error(path: &Path, e: &serde_json::Error) -> CliError {
    CliError::new(
        EXIT_CONFIG,
        format!(
            "{}: line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ),
    )
}

fn read_json(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| json_error(path, &e))
}

fn typed<T: DeserializeOwned>(path: &Path, value: Value) -> CliResult<T> {
    serde_json::from_value(value).map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", path.display())))
}

fn config_path(cli: &Cli) -> CliResult<&Path> {
    cli.config
        .as_deref()
        .ok_or_else(|| CliError::new(EXIT_CONFIG, "this command needs --config <path>"))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Replaces a `"design": "<path>"` entry by the design it points to.
fn inline_design(value: &mut Value, base: &Path) -> CliResult<()> {
    if let Some(Value::String(rel)) = value.get("design") {
        let path = base.join(rel);
        let design = read_json(&path)?;
        let design: InputDesign = typed(&path, design)?;
        value["design"] = serde_json::to_value(design).expect("design serializes");
    }
    Ok(())
}

fn apply_overrides(value: &mut Value, cli: &Cli) -> CliResult<()> {
    if let Some(seed) = cli.seed {
        value["seed"] = seed.into();
    }
    if let Some(r) = cli.replicates {
        value["replicates"] = r.into();
    }
    if let Some(list) = &cli.methods {
        let methods = Method::parse_list(list)?;
        value["methods"] = serde_json::to_value(methods).expect("methods serialize");
    }
    Ok(())
}

/// Loads, resolves and types the config of the current command.
fn load_config<T: DeserializeOwned>(cli: &Cli) -> CliResult<(T, PathBuf)> {
    let path = config_path(cli)?;
    let mut value = read_json(path)?;
    if !value.is_object() {
        return Err(CliError::new(EXIT_CONFIG, format!("{}: expected a JSON object", path.display())));
    }
    let base = base_dir(path);
    inline_design(&mut value, &base)?;
    apply_overrides(&mut value, cli)?;
    Ok((typed(path, value)?, base))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    fs::write(path, text + "\n").map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", path.display())))
}

/// JSON Schemas of the files the CLI writes, keyed by report name. The
/// dataset sidecar is written as `<name>.json` next to the CSV.
pub fn output_schemas() -> Vec<(&'static str, Value)> {
    fn schema<T: JsonSchema>() -> Value {
        serde_json::to_value(schemars::schema_for!(T)).expect("schema serializes")
    }
    vec![
        ("design", schema::<Hashed<InputDesign>>()),
        ("design_report", schema::<Hashed<DesignOutcome>>()),
        ("dataset_sidecar", schema::<Hashed<DatasetMeta>>()),
        ("estimate", schema::<Hashed<EstimateReport>>()),
        ("benchmark", schema::<Hashed<McStats>>()),
        ("timing", schema::<Timing>()),
        ("bias_prediction", schema::<Hashed<BiasPrediction>>()),
        ("basis_check", schema::<Hashed<BasisCheck>>()),
    ]
}

/// Adds the config hash to a serialized report.
#[derive(Debug, Serialize, Deserialize, JsonSchema)]
pub struct Hashed<T> {
    pub config_hash: String,
    #[serde(flatten)]
    pub body: T,
}

// ── design ──────────────────────────────────────────────────────────────

fn cmd_design(cli: &Cli) -> CliResult<i32> {
    let (problem, _): (DesignProblem, _) = load_config(cli)?;
    let hash = config_hash(&problem);
    let outcome = optimize_design(&problem)?;
    write_json(
        &cli.out.join("design.json"),
        &Hashed {
            config_hash: hash.clone(),
            body: &outcome.design,
        },
    )?;
    write_json(
        &cli.out.join("design_report.json"),
        &Hashed {
            config_hash: hash,
            body: &outcome,
        },
    )?;
    println!("p = {:.6}", outcome.design.p);
    println!("u = {:?}", outcome.design.u);
    println!("objective MSE(H) = {:.6e}", outcome.objective);
    println!(
        "constraints: energy {:.6} <= {}, sum u = {:.2e}, violations: {}",
        outcome.constraints.energy,
        problem.energy_bound,
        outcome.constraints.initial_sum,
        if outcome.constraints.is_feasible() {
            "none".to_string()
        } else {
            format!("{:?}", outcome.constraints.violations)
        }
    );
    Ok(EXIT_OK)
}

// ── simulate ────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SimulateConfig {
    pub design: InputDesign,
    pub tau: f64,
    pub lambda: f64,
    pub seed: u64,
    /// File stem for the CSV and its sidecar.
    #[serde(default = "default_stem")]
    pub name: String,
}

fn default_stem() -> String {
    "data".into()
}

fn cmd_simulate(cli: &Cli) -> CliResult<i32> {
    let (cfg, _): (SimulateConfig, _) = load_config(cli)?;
    let hash = config_hash(&cfg);
    let data = simulate(&cfg.design, cfg.tau, cfg.lambda, cfg.seed)?;
    let csv = cli.out.join(format!("{}.csv", cfg.name));
    data.save(&csv)?;
    write_json(
        &Dataset::sidecar_path(&csv),
        &Hashed {
            config_hash: hash,
            body: data.meta(),
        },
    )?;
    println!("wrote {} samples to {}", data.n_samples(), csv.display());
    Ok(EXIT_OK)
}

// ── estimate ────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EstimateConfig {
    /// Path to the dataset CSV (its sidecar must sit next to it).
    pub dataset: PathBuf,
    pub design: InputDesign,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    pub k_model: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_markov: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<f64>,
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum MethodOutcome {
    Estimate(DelayEstimate),
    Error { method: Method, error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EstimateReport {
    pub n_samples: usize,
    pub results: Vec<MethodOutcome>,
    /// Bound evaluated at the known delay if the dataset carries one,
    /// otherwise at the first successful estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crlb: Option<CrlbReport>,
}

fn build_estimator(cfg: &EstimateConfig, method: Method, n: usize) -> Result<Box<dyn DelayEstimator>> {
    let m = cfg.m_markov.unwrap_or(cfg.k_model + 1);
    Ok(match method {
        Method::Proposed => Box::new(ProposedEstimator::new(&cfg.design, n, cfg.k_model, m)?),
        Method::Ml => Box::new(MlEstimator::new(
            &cfg.design,
            n,
            cfg.tau_max.unwrap_or_else(|| cfg.design.tau_max()),
            MlConfig::default(),
        )?),
        Method::LagSpline => Box::new(LagSplineEstimator::new(&cfg.design, n, cfg.k_model, m)?),
        Method::FreqInterp => Box::new(FreqInterpEstimator::new(&cfg.design, n, FreqInterpConfig::default())?),
    })
}

fn cmd_estimate(cli: &Cli) -> CliResult<i32> {
    let (mut cfg, base): (EstimateConfig, _) = load_config(cli)?;
    cfg.dataset = base.join(&cfg.dataset);
    let hash = config_hash(&cfg);
    let data = Dataset::load(&cfg.dataset)?;
    if (data.delta - cfg.design.delta).abs() > 1e-12 * cfg.design.delta {
        return Err(CliError::new(
            EXIT_CONFIG,
            format!(
                "dataset sampling time {} does not match the design sampling time {}",
                data.delta, cfg.design.delta
            ),
        ));
    }
    let n = data.n_samples();
    let mut results = Vec::new();
    for &method in &cfg.methods {
        let outcome = build_estimator(&cfg, method, n).and_then(|e| e.estimate(&data));
        results.push(match outcome {
            Ok(mut est) => {
                est.config_hash = Some(hash.clone());
                println!("{:<12} tau_hat = {:.9e}", method.as_str(), est.tau_hat);
                MethodOutcome::Estimate(est)
            }
            Err(e) => {
                println!("{:<12} failed: {e}", method.as_str());
                MethodOutcome::Error {
                    method,
                    error: e.to_string(),
                }
            }
        });
    }
    let first_ok = results.iter().find_map(|r| match r {
        MethodOutcome::Estimate(e) => Some(e.tau_hat.max(0.0)),
        MethodOutcome::Error { .. } => None,
    });
    let bound = match (data.true_tau.or(first_ok), data.noise_var > 0.0) {
        (Some(tau), true) => crlb(&cfg.design, tau, data.noise_var).ok(),
        _ => None,
    };
    if let Some(b) = &bound {
        println!("{:<12} {:.6e}", "crlb", b.bound);
    }
    write_json(
        &cli.out.join("estimate.json"),
        &Hashed {
            config_hash: hash,
            body: EstimateReport {
                n_samples: n,
                results,
                crlb: bound,
            },
        },
    )?;
    Ok(if first_ok.is_some() { EXIT_OK } else { EXIT_ESTIMATION })
}

// ── benchmark ───────────────────────────────────────────────────────────

#[derive(Debug, Serialize, JsonSchema)]
pub struct Timing {
    pub runtime_s: f64,
    pub workers: usize,
}

/// Runs the benchmark in `cli` and returns the statistics with their hash.
pub fn benchmark_from_cli(cli: &Cli) -> CliResult<(McStats, String)> {
    let (cfg, _): (BenchmarkConfig, _) = load_config(cli)?;
    let hash = config_hash(&cfg);
    Ok((run_monte_carlo(&cfg, cli.workers.max(1))?, hash))
}

fn cmd_benchmark(cli: &Cli) -> CliResult<i32> {
    let start = Instant::now();
    let (stats, hash) = benchmark_from_cli(cli)?;
    let elapsed = start.elapsed().as_secs_f64();
    write_json(
        &cli.out.join("benchmark.json"),
        &Hashed {
            config_hash: hash,
            body: &stats,
        },
    )?;
    fs::write(cli.out.join("histogram.csv"), stats.histogram_csv()).map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?;
    write_json(
        &cli.out.join("timing.json"),
        &Timing {
            runtime_s: elapsed,
            workers: cli.workers.max(1),
        },
    )?;
    println!(
        "{:<12} {:>12} {:>12} {:>12} {:>8}",
        "method", "bias", "var", "mse", "failed"
    );
    for (m, s) in &stats.per_method {
        println!(
            "{:<12} {:>12.4e} {:>12.4e} {:>12.4e} {:>8}",
            m.as_str(),
            s.bias,
            s.var,
            s.mse_raw,
            s.failures
        );
    }
    if let Some(b) = stats.crlb {
        println!("{:<12} {:>38.4e}", "crlb", b);
    }
    let failing: Vec<&str> = stats
        .per_method
        .keys()
        .filter(|m| stats.failure_rate(**m) > MAX_FAILURE_RATE)
        .map(|m| m.as_str())
        .collect();
    if !failing.is_empty() {
        eprintln!("error: failure rate above 50% for {}", failing.join(", "));
        return Ok(EXIT_ESTIMATION);
    }
    Ok(EXIT_OK)
}

// ── bias-predict ────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BiasPredictConfig {
    pub design: InputDesign,
    pub tau_check: f64,
    pub lambda: f64,
    pub k_model: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_markov: Option<usize>,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub include_truncation: bool,
}

fn default_mc_samples() -> usize {
    10_000
}

fn cmd_bias_predict(cli: &Cli) -> CliResult<i32> {
    let (mut cfg, _): (BiasPredictConfig, _) = load_config(cli)?;
    if let Some(r) = cli.replicates {
        cfg.mc_samples = r;
    }
    let hash = config_hash(&cfg);
    let pred = predict_bias_tau(
        &cfg.design,
        cfg.lambda,
        cfg.tau_check,
        &BiasPredictionConfig {
            k_model: cfg.k_model,
            m_markov: cfg.m_markov.unwrap_or(cfg.k_model + 1),
            mc_samples: cfg.mc_samples,
            seed: cfg.seed,
            include_truncation: cfg.include_truncation,
        },
    )?;
    println!(
        "predicted bias = {:.6e} (standard error {:.2e}, {} samples)",
        pred.predicted_bias, pred.standard_error, pred.mc_samples
    );
    write_json(
        &cli.out.join("bias_prediction.json"),
        &Hashed {
            config_hash: hash,
            body: pred,
        },
    )?;
    Ok(EXIT_OK)
}

// ── basis-check ─────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BasisCheckConfig {
    pub p: f64,
    /// Highest basis index `K`.
    pub k_model: usize,
    pub delta: f64,
    /// Record length; orthonormality on `[0, T]` needs the basis to have
    /// decayed by `T`.
    pub horizon: f64,
}

impl Default for BasisCheckConfig {
    fn default() -> Self {
        Self {
            p: 20.0,
            k_model: 6,
            delta: 1e-4,
            horizon: 2.0,
        }
    }
}

fn cmd_basis_check(cli: &Cli) -> CliResult<i32> {
    let cfg: BasisCheckConfig = if cli.config.is_some() {
        load_config(cli)?.0
    } else {
        BasisCheckConfig::default()
    };
    if !(cfg.delta > 0.0 && cfg.horizon >= cfg.delta) {
        return Err(invalid("basis check needs 0 < delta <= horizon").into());
    }
    let hash = config_hash(&cfg);
    let check: BasisCheck = check_basis(
        &BasisConfig::new(cfg.p, cfg.k_model + 1)?,
        cfg.delta,
        n_samples_for(cfg.horizon, cfg.delta),
    )?;
    let passed = check.passed(BASIS_CHECK_TOL);
    println!("cond(Phi)            = {:.6e}", check.cond);
    println!("sampling error (rel) = {:.3e}", check.sampling_error);
    println!("transition error     = {:.3e}", check.transition_error);
    println!("l_k(0) error         = {:.3e}", check.initial_value_error);
    println!("|delta Phi'Phi - I|  = {:.3e}", check.gram_deviation);
    println!("{}", if passed { "PASS" } else { "FAIL" });
    write_json(
        &cli.out.join("basis_check.json"),
        &Hashed {
            config_hash: hash,
            body: &check,
        },
    )?;
    Ok(if passed { EXIT_OK } else { EXIT_ESTIMATION })
}
