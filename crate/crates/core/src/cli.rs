//! Command-line front end: `fit`, `simulate`, `benchmark`, `screen` and `evaluate`.
//!
//! Machine-readable results go to `--out` (or standard output); logs go to standard error.
//! Every written file is accompanied by `<file>.manifest.json`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::binarize::GridStrategy;
use crate::data::{load_csv, write_csv_to, SurvivalDataset};
use crate::error::Error;
use crate::pipelines::{
    fit_binilasso, fit_minilasso_pipeline, limited_one_step, limited_two_step, limited_two_step_mini,
    refit_categorized_holdout, screen_features, CutpointReport, GridConfig, LimitMode, LimitedCutConfig, RankingRule,
    ScreeningResult,
};
use crate::simgen::{run_benchmark, simulate, BenchmarkConfig, Method, ScenarioConfig};
use crate::solver::{CvConfig, LambdaRule, PathConfig};
use crate::unilasso::{LooMethod, MiniLassoConfig};

/// Exit status for input and usage errors.
pub const EXIT_INPUT: i32 = 1;
/// Exit status for numerical failures under `--strict`.
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "binilasso", version, about = "Cut-point detection for Cox models with biniLasso and miniLasso")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Seed for folds, simulation and benchmark replicates.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Exit with status 2 on convergence or replicate failures.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Output file (directory for `benchmark`); standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect cut-points in a CSV dataset.
    Fit(FitArgs),
    /// Draw a dataset from a simulation scenario.
    Simulate(SimulateArgs),
    /// Run the simulation benchmark and write long-format CSVs.
    Benchmark(BenchmarkArgs),
    /// Rank features by univariate Cox AIC and IBS.
    Screen(ScreenArgs),
    /// Refit a cut-point report as a categorized Cox model and evaluate it.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "time")]
    pub time: String,
    #[arg(long, default_value = "event")]
    pub event: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// bini or mini.
    #[arg(long, default_value = "bini")]
    pub method: String,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// quantile or uniform.
    #[arg(long, default_value = "quantile")]
    pub grid: String,
    /// Add an unpenalized `1{x > min}` column per feature.
    #[arg(long)]
    pub boundary: bool,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// min or 1se.
    #[arg(long, default_value = "min")]
    pub rule: String,
    /// exact or one-step leave-one-out slopes (mini only).
    #[arg(long, default_value = "exact")]
    pub loo: String,
    /// Keep at most this many cut-points per feature.
    #[arg(long)]
    pub max_cuts: Option<usize>,
    /// one-step or two-step (with --max-cuts).
    #[arg(long, default_value = "two-step")]
    pub mode: String,
    /// entry-order or max-abs-coef (with --max-cuts).
    #[arg(long, default_value = "entry-order")]
    pub ranking: String,
    /// Also refit the report and write `<out>.evaluation.json`.
    #[arg(long)]
    pub evaluate: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Scenario 1-4 (default 1).
    #[arg(long)]
    pub scenario: Option<u8>,
    /// Sample size (default 500).
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of features (scenario default when omitted).
    #[arg(long)]
    pub p: Option<usize>,
    /// Target censored fraction.
    #[arg(long)]
    pub censor: Option<f64>,
    /// JSON scenario configuration; explicit flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchmarkArgs {
    /// Comma-separated scenario numbers.
    #[arg(long, default_value = "1", value_delimiter = ',')]
    pub scenario: Vec<u8>,
    /// Comma-separated sample sizes.
    #[arg(long, default_value = "2000", value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub replicates: usize,
    /// Comma-separated: bini, mini, limited_one_step, limited_two_step.
    #[arg(long, default_value = "bini,mini", value_delimiter = ',')]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 2)]
    pub max_cuts: usize,
    #[arg(long, default_value = "exact")]
    pub loo: String,
    #[arg(long, default_value = "entry-order")]
    pub ranking: String,
    /// JSON benchmark configuration replacing the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write wall times to `timing.csv` (not reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScreenArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Features kept per metric.
    #[arg(long, default_value_t = 50)]
    pub top: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Cut-point report JSON written by `fit`.
    #[arg(long)]
    pub report: PathBuf,
    /// Held-out CSV for IBS and C-index (same columns as the input).
    #[arg(long)]
    pub test: Option<PathBuf>,
}

/// Provenance record written next to every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub config: Value,
    pub seed: u64,
    pub threads: Option<usize>,
    pub software: String,
    pub version: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub started_at: u64,
    pub finished_at: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> crate::Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(Self { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(&bytes)) })
    }
}

fn now() -> u64 {
    if let Some(v) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse().ok()) {
        return v;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// An input or usage error, reported with exit status 1.
struct Failure(String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(e.to_string())
    }
}

type CmdResult = std::result::Result<Outcome, Failure>;

/// What a command produced, for the manifest and strict-mode checks.
struct Outcome {
    config: Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    numerical_problem: Option<String>,
}

/// Parses `args` (including the program name) and runs the command; returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    let started_at = now();
    let global = cli.global.clone();
    let name = match &cli.command {
        Command::Fit(_) => "fit",
        Command::Simulate(_) => "simulate",
        Command::Benchmark(_) => "benchmark",
        Command::Screen(_) => "screen",
        Command::Evaluate(_) => "evaluate",
    };
    let result = with_threads(global.threads, || match &cli.command {
        Command::Fit(a) => cmd_fit(&global, a),
        Command::Simulate(a) => cmd_simulate(&global, a),
        Command::Benchmark(a) => cmd_benchmark(&global, a),
        Command::Screen(a) => cmd_screen(&global, a),
        Command::Evaluate(a) => cmd_evaluate(&global, a),
    });
    let outcome = match result {
        Ok(o) => o,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            return EXIT_INPUT;
        }
    };
    if let Err(msg) = write_manifest(name, &args, &global, &outcome, started_at) {
        eprintln!("error: {msg}");
        return EXIT_INPUT;
    }
    match outcome.numerical_problem {
        Some(msg) if global.strict => {
            eprintln!("error: {msg}");
            EXIT_NUMERICAL
        }
        Some(msg) => {
            log::warn!("{msg}");
            0
        }
        None => 0,
    }
}

fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> std::result::Result<R, Failure> + Send) -> std::result::Result<R, Failure> {
    match threads {
        None => f(),
        Some(0) => Err(Failure("--threads must be at least 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Failure(e.to_string()))?
            .install(f),
    }
}

fn write_manifest(name: &str, args: &[OsString], global: &GlobalArgs, o: &Outcome, started_at: u64) -> Result<(), String> {
    if o.outputs.is_empty() {
        return Ok(());
    }
    let digests = |paths: &[PathBuf]| -> Result<Vec<FileDigest>, String> {
        paths.iter().map(|p| FileDigest::of(p).map_err(|e| format!("{}: {e}", p.display()))).collect()
    };
    let manifest = RunManifest {
        command: name.to_string(),
        arguments: args.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
        config: o.config.clone(),
        seed: global.seed,
        threads: global.threads,
        software: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        inputs: digests(&o.inputs)?,
        outputs: digests(&o.outputs)?,
        started_at,
        finished_at: now(),
    };
    let target = match &global.out {
        Some(p) if p.is_dir() => p.join("manifest.json"),
        Some(p) => sibling(p, "manifest.json"),
        None => return Ok(()),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| e.to_string())?;
    std::fs::write(&target, text + "\n").map_err(|e| format!("{}: {e}", target.display()))
}

/// `report.json` -> `report.json.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `text` to `out`, or to standard output. Returns the file written, if any.
fn emit(out: Option<&Path>, text: &str) -> std::result::Result<Option<PathBuf>, Failure> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Failure(format!("{}: {e}", dir.display())))?;
            }
            std::fs::write(p, text).map_err(|e| Failure(format!("{}: {e}", p.display())))?;
            Ok(Some(p.to_path_buf()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Failure(e.to_string()))?;
            Ok(None)
        }
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, Failure> {
    s.parse().map_err(|e: Error| Failure(e.to_string()))
}

fn load(input: &InputArgs) -> std::result::Result<SurvivalDataset, Failure> {
    load_csv(&input.input, &input.time, &input.event).map_err(|e| Failure(format!("{}: {e}", input.input.display())))
}

fn to_json<T: Serialize>(v: &T) -> std::result::Result<String, Failure> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| Failure(e.to_string()))
}

fn cmd_fit(global: &GlobalArgs, a: &FitArgs) -> CmdResult {
    let ds = load(&a.input)?;
    let strategy: GridStrategy = parse(&a.grid)?;
    if strategy == GridStrategy::Explicit {
        return Err(Failure("explicit grids are not available from the command line".into()));
    }
    let grid = GridConfig { bins: a.bins, strategy, boundary_indicators: a.boundary, thresholds: Vec::new() };
    let rule: LambdaRule = parse(&a.rule)?;
    let cv = CvConfig { n_folds: a.folds, seed: global.seed, path: PathConfig::default(), rule };
    let loo: LooMethod = parse(&a.loo)?;
    let mini = MiniLassoConfig { cv, loo };
    let report: CutpointReport = match (a.method.as_str(), a.max_cuts) {
        ("bini", None) => fit_binilasso(&ds, &grid, &cv)?.0,
        ("mini", None) => fit_minilasso_pipeline(&ds, &grid, &mini)?.0,
        (method @ ("bini" | "mini"), Some(m)) => {
            let mode: LimitMode = parse(&a.mode)?;
            let ranking_rule: RankingRule = parse(&a.ranking)?;
            let cfg = LimitedCutConfig { ranking_rule, ..LimitedCutConfig::new(m, mode)? };
            match (method, mode) {
                ("bini", LimitMode::TwoStep) => limited_two_step(&ds, &cfg, &grid, &cv)?,
                ("bini", LimitMode::OneStep) => limited_one_step(&ds, &cfg, &grid, &cv.path)?,
                (_, LimitMode::TwoStep) => limited_two_step_mini(&ds, &cfg, &grid, &mini)?,
                (_, LimitMode::OneStep) => {
                    return Err(Failure("--method mini supports only --mode two-step".into()))
                }
            }
        }
        (other, _) => return Err(Failure(format!("unknown method '{other}' (expected bini or mini)"))),
    };
    let mut outputs: Vec<PathBuf> = emit(global.out.as_deref(), &to_json(&report)?)?.into_iter().collect();
    let mut numerical_problem = (!report.converged).then(|| "the selected fit did not converge".to_string());
    if a.evaluate {
        if report.is_empty() {
            log::warn!("report has no cut-points; nothing to evaluate");
        } else {
            let refit = refit_categorized_holdout(&ds, None, &report)?;
            if !refit.fit.converged {
                numerical_problem = Some("the categorized refit did not converge".into());
            }
            let text = to_json(&json!({ "evaluation": refit.evaluation, "coefficients": coefficient_table(&refit.columns, &refit.fit.beta) }))?;
            match &global.out {
                Some(p) => outputs.extend(emit(Some(&sibling(p, "evaluation.json")), &text)?),
                None => eprint!("{text}"),
            }
        }
    }
    Ok(Outcome {
        config: json!({ "fit": a, "grid": grid, "n_folds": cv.n_folds, "seed": global.seed }),
        inputs: vec![a.input.input.clone()],
        outputs,
        numerical_problem,
    })
}

fn coefficient_table(columns: &[(String, f64)], beta: &[f64]) -> Value {
    columns.iter().zip(beta).map(|((f, t), b)| json!({ "feature": f, "threshold": t, "coefficient": b })).collect()
}

fn cmd_simulate(global: &GlobalArgs, a: &SimulateArgs) -> CmdResult {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<ScenarioConfig>(&text).map_err(|e| Failure(format!("{}: {e}", path.display())))?
        }
        None => ScenarioConfig::for_scenario(a.scenario.unwrap_or(1), a.n.unwrap_or(500), global.seed),
    };
    cfg.seed = global.seed;
    if let Some(s) = a.scenario {
        cfg.scenario = s;
    }
    if let Some(n) = a.n {
        cfg.n = n;
    }
    if let Some(p) = a.p {
        cfg.p = p;
    }
    if let Some(c) = a.censor {
        cfg.censor_target = c;
    }
    let sim = simulate(&cfg)?;
    let mut buf = Vec::new();
    write_csv_to(&sim.data, &mut buf)?;
    let text = String::from_utf8(buf).map_err(|e| Failure(e.to_string()))?;
    let mut outputs: Vec<PathBuf> = emit(global.out.as_deref(), &text)?.into_iter().collect();
    if let Some(p) = &global.out {
        outputs.extend(emit(Some(&sibling(p, "truth.json")), &to_json(&sim.truth)?)?);
    }
    Ok(Outcome {
        config: serde_json::to_value(&cfg).map_err(|e| Failure(e.to_string()))?,
        inputs: a.config.iter().cloned().collect(),
        outputs,
        numerical_problem: None,
    })
}

fn cmd_benchmark(global: &GlobalArgs, a: &BenchmarkArgs) -> CmdResult {
    let config = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<BenchmarkConfig>(&text).map_err(|e| Failure(format!("{}: {e}", path.display())))?
        }
        None => {
            let mut scenarios = Vec::new();
            for &s in &a.scenario {
                for &n in &a.n {
                    let mut sc = ScenarioConfig::for_scenario(s, n, global.seed);
                    if let Some(p) = a.p {
                        sc.p = p;
                    }
                    scenarios.push(sc);
                }
            }
            let methods = a.methods.iter().map(|m| parse::<Method>(m)).collect::<std::result::Result<Vec<_>, _>>()?;
            BenchmarkConfig {
                scenarios,
                methods,
                replicates: a.replicates,
                grid: GridConfig { bins: a.bins, ..Default::default() },
                n_folds: a.folds,
                loo: parse(&a.loo)?,
                max_cuts: a.max_cuts,
                ranking_rule: parse(&a.ranking)?,
            }
        }
    };
    let dir = global.out.clone().unwrap_or_else(|| PathBuf::from("bench"));
    let report = run_benchmark(&config, Some(&dir))?;
    let mut outputs = Vec::new();
    let mut scenarios: Vec<u8> = report.rows.iter().map(|r| r.scenario).collect();
    scenarios.sort_unstable();
    scenarios.dedup();
    outputs.extend(scenarios.iter().map(|s| dir.join(format!("scenario_{s}.csv"))));
    outputs.push(dir.join("summary.csv"));
    outputs.push(dir.join("failures.csv"));
    let timing = dir.join("timing.csv");
    if a.timing {
        outputs.push(timing);
    } else {
        std::fs::remove_file(&timing).map_err(|e| Failure(format!("{}: {e}", timing.display())))?;
    }
    let numerical_problem =
        (!report.failures.is_empty()).then(|| format!("{} benchmark runs failed; see failures.csv", report.failures.len()));
    Ok(Outcome {
        config: serde_json::to_value(&config).map_err(|e| Failure(e.to_string()))?,
        inputs: a.config.iter().cloned().collect(),
        outputs,
        numerical_problem,
    })
}

fn screening_csv(result: &ScreeningResult) -> String {
    let mut text = String::from(ScreeningResult::CSV_HEADER);
    text.push('\n');
    for row in result.csv_rows() {
        text.push_str(&row);
        text.push('\n');
    }
    text
}

fn cmd_screen(global: &GlobalArgs, a: &ScreenArgs) -> CmdResult {
    if a.top == 0 {
        return Err(Failure("--top must be at least 1".into()));
    }
    let ds = load(&a.input)?;
    let result = screen_features(&ds, a.top)?;
    let mut outputs: Vec<PathBuf> = emit(global.out.as_deref(), &screening_csv(&result))?.into_iter().collect();
    if let Some(p) = &global.out {
        let list: String = result.selected.iter().map(|s| format!("{s}\n")).collect();
        outputs.extend(emit(Some(&sibling(p, "selected.txt")), &list)?);
    }
    log::info!("{} features screened in", result.selected.len());
    Ok(Outcome {
        config: json!({ "screen": a }),
        inputs: vec![a.input.input.clone()],
        outputs,
        numerical_problem: None,
    })
}

fn cmd_evaluate(global: &GlobalArgs, a: &EvaluateArgs) -> CmdResult {
    let ds = load(&a.input)?;
    let text = std::fs::read_to_string(&a.report).map_err(|e| Failure(format!("{}: {e}", a.report.display())))?;
    let report = CutpointReport::from_json(&text).map_err(|e| Failure(format!("{}: {e}", a.report.display())))?;
    let test = match &a.test {
        Some(p) => Some(load(&InputArgs { input: p.clone(), time: a.input.time.clone(), event: a.input.event.clone() })?),
        None => None,
    };
    let refit = refit_categorized_holdout(&ds, test.as_ref(), &report)?;
    let body = json!({
        "evaluation": refit.evaluation,
        "coefficients": coefficient_table(&refit.columns, &refit.fit.beta),
        "converged": refit.fit.converged,
    });
    let outputs: Vec<PathBuf> = emit(global.out.as_deref(), &to_json(&body)?)?.into_iter().collect();
    let mut inputs = vec![a.input.input.clone(), a.report.clone()];
    inputs.extend(a.test.iter().cloned());
    Ok(Outcome {
        config: json!({ "evaluate": a }),
        inputs,
        outputs,
        numerical_problem: (!refit.fit.converged).then(|| "the categorized refit did not converge".to_string()),
    })
}
