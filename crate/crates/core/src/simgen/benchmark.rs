use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{child_seed, simulate, ScenarioConfig, SimulatedDataset};
use crate::design::RealDesign;
use crate::error::{Error, Result};
use crate::metrics::{cutpoint_accuracy, grid_recovery, null_fit};
use crate::pipelines::{
    evaluate_fit, fit_binilasso, fit_minilasso_pipeline, limited_one_step, limited_two_step, refit_categorized,
    CutpointReport, GridConfig, LimitMode, LimitedCutConfig, RankingRule,
};
use crate::solver::{CoxLasso, CvConfig};
use crate::unilasso::{LooMethod, MiniLassoConfig};

/// Estimators compared by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bini,
    Mini,
    LimitedOneStep,
    LimitedTwoStep,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Bini => "bini",
            Method::Mini => "mini",
            Method::LimitedOneStep => "limited_one_step",
            Method::LimitedTwoStep => "limited_two_step",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bini" => Ok(Self::Bini),
            "mini" => Ok(Self::Mini),
            "limited_one_step" | "limited-one-step" | "one-step" => Ok(Self::LimitedOneStep),
            "limited_two_step" | "limited-two-step" | "two-step" => Ok(Self::LimitedTwoStep),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// Label of the true-model rows in the long-format output.
pub const TRUE_MODEL: &str = "true_model";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    /// Each entry's `seed` is the master seed of its replicates.
    pub scenarios: Vec<ScenarioConfig>,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub grid: GridConfig,
    pub n_folds: usize,
    pub loo: LooMethod,
    /// Cut-point cap of the limited methods.
    pub max_cuts: usize,
    pub ranking_rule: RankingRule,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            scenarios: vec![ScenarioConfig::for_scenario(1, 2000, 0)],
            methods: vec![Method::Bini, Method::Mini],
            replicates: 200,
            grid: GridConfig::default(),
            n_folds: 10,
            loo: LooMethod::Exact,
            max_cuts: 2,
            ranking_rule: RankingRule::EntryOrder,
        }
    }
}

/// One long-format observation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub scenario: u8,
    pub method: String,
    pub replicate: usize,
    pub n: usize,
    pub p: usize,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub scenario: u8,
    pub method: String,
    pub replicate: usize,
    pub n: usize,
    pub p: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateFailure {
    pub scenario: u8,
    pub method: String,
    pub replicate: usize,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub message: String,
}

/// Mean and sample standard deviation of one metric; `sd` is 0 below two observations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: u8,
    pub method: String,
    pub n: usize,
    pub p: usize,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub rows: Vec<MetricRow>,
    pub timings: Vec<TimingRow>,
    pub failures: Vec<ReplicateFailure>,
    pub summary: Vec<SummaryRow>,
}

impl BenchmarkReport {
    /// Values of `metric` for `method` across replicates, in replicate order.
    pub fn values(&self, scenario: u8, method: &str, metric: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.scenario == scenario && r.method == method && r.metric == metric)
            .map(|r| r.value)
            .collect()
    }

    pub fn summary_for(&self, scenario: u8, method: &str, metric: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.scenario == scenario && s.method == method && s.metric == metric)
    }
}

struct Replicate {
    rows: Vec<MetricRow>,
    timings: Vec<TimingRow>,
    failures: Vec<ReplicateFailure>,
}

/// Runs every method on `replicates` draws of every scenario.
///
/// With `output_dir`, writes `scenario_<s>.csv` (long format), `summary.csv`, `timing.csv`
/// and `failures.csv`. Wall times go only to `timing.csv`, so the other files are
/// reproducible bit for bit.
pub fn run_benchmark(config: &BenchmarkConfig, output_dir: Option<&Path>) -> Result<BenchmarkReport> {
    if config.replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be at least 1".into()));
    }
    if config.max_cuts == 0 {
        return Err(Error::InvalidConfig("max_cuts must be at least 1".into()));
    }
    for s in &config.scenarios {
        s.validate()?;
    }
    let jobs: Vec<(usize, usize)> =
        (0..config.scenarios.len()).flat_map(|s| (0..config.replicates).map(move |r| (s, r))).collect();
    let results: Vec<Replicate> = jobs
        .into_par_iter()
        .map(|(s, r)| {
            let base = &config.scenarios[s];
            let seed = child_seed(base.seed, r as u64);
            log::info!("scenario {} n={} replicate {} (seed {seed})", base.scenario, base.n, r);
            run_replicate(config, base, r, seed)
        })
        .collect();

    let mut report = BenchmarkReport { rows: Vec::new(), timings: Vec::new(), failures: Vec::new(), summary: Vec::new() };
    for rep in results {
        report.rows.extend(rep.rows);
        report.timings.extend(rep.timings);
        report.failures.extend(rep.failures);
    }
    report.summary = summarize(&report.rows);
    if let Some(dir) = output_dir {
        write_outputs(&report, dir)?;
    }
    Ok(report)
}

fn run_replicate(config: &BenchmarkConfig, base: &ScenarioConfig, replicate: usize, seed: u64) -> Replicate {
    let mut out = Replicate { rows: Vec::new(), timings: Vec::new(), failures: Vec::new() };
    let scenario_cfg = ScenarioConfig { seed, ..base.clone() };
    let fail = |method: &str, e: &Error| ReplicateFailure {
        scenario: base.scenario,
        method: method.to_string(),
        replicate,
        n: base.n,
        p: base.p,
        seed,
        message: e.to_string(),
    };
    let sim = match simulate(&scenario_cfg) {
        Ok(s) => s,
        Err(e) => {
            out.failures.push(fail("simulate", &e));
            return out;
        }
    };
    let mut push = |method: &str, metric: &str, value: f64| {
        out.rows.push(MetricRow {
            scenario: base.scenario,
            method: method.to_string(),
            replicate,
            n: base.n,
            p: base.p,
            metric: metric.to_string(),
            value,
            seed,
        })
    };
    push("data", "censored_fraction", sim.data.events().iter().filter(|&&e| !e).count() as f64 / base.n as f64);
    match true_model_metrics(&sim) {
        Ok(m) => m.into_iter().for_each(|(k, v)| push(TRUE_MODEL, k, v)),
        Err(e) => out.failures.push(fail(TRUE_MODEL, &e)),
    }
    for &method in &config.methods {
        let start = Instant::now();
        let result = run_method(config, &sim, method, seed);
        let seconds = start.elapsed().as_secs_f64();
        match result.and_then(|(report, extra)| method_metrics(&sim, &report, extra)) {
            Ok(metrics) => {
                for (k, v) in metrics {
                    out.rows.push(MetricRow {
                        scenario: base.scenario,
                        method: method.as_str().to_string(),
                        replicate,
                        n: base.n,
                        p: base.p,
                        metric: k.to_string(),
                        value: v,
                        seed,
                    });
                }
                out.timings.push(TimingRow {
                    scenario: base.scenario,
                    method: method.as_str().to_string(),
                    replicate,
                    n: base.n,
                    p: base.p,
                    seconds,
                });
            }
            Err(e) => out.failures.push(fail(method.as_str(), &e)),
        }
    }
    out
}

type Extra = Vec<(&'static str, f64)>;

fn run_method(config: &BenchmarkConfig, sim: &SimulatedDataset, method: Method, seed: u64) -> Result<(CutpointReport, Extra)> {
    let ds = &sim.data;
    let cv = CvConfig { n_folds: config.n_folds, seed, ..Default::default() };
    match method {
        Method::Bini => Ok((fit_binilasso(ds, &config.grid, &cv)?.0, Vec::new())),
        Method::Mini => {
            let (report, fit) = fit_minilasso_pipeline(ds, &config.grid, &MiniLassoConfig { cv, loo: config.loo })?;
            let min_theta = fit.theta.iter().copied().fold(f64::INFINITY, f64::min);
            let consistent = fit
                .composite_effects
                .iter()
                .zip(&fit.univariate.slopes)
                .all(|(&c, &s)| c == 0.0 || c.signum() == s.signum());
            Ok((report, vec![("min_theta", min_theta), ("sign_consistent", consistent as u8 as f64)]))
        }
        Method::LimitedTwoStep => {
            let cfg = LimitedCutConfig { ranking_rule: config.ranking_rule, ..LimitedCutConfig::new(config.max_cuts, LimitMode::TwoStep)? };
            Ok((limited_two_step(ds, &cfg, &config.grid, &cv)?, Vec::new()))
        }
        Method::LimitedOneStep => {
            let cfg = LimitedCutConfig { ranking_rule: config.ranking_rule, ..LimitedCutConfig::new(config.max_cuts, LimitMode::OneStep)? };
            Ok((limited_one_step(ds, &cfg, &config.grid, &cv.path)?, Vec::new()))
        }
    }
}

fn method_metrics(sim: &SimulatedDataset, report: &CutpointReport, extra: Extra) -> Result<Extra> {
    let names = sim.data.feature_names();
    let truth = sim.truth.named_cuts(names);
    let acc = cutpoint_accuracy(&truth, &report.named_thresholds());
    let grids: Vec<(String, Vec<f64>)> = report
        .grid
        .as_ref()
        .map(|g| g.features.iter().map(|f| (f.name.clone(), f.thresholds.clone())).collect())
        .unwrap_or_default();
    let rec = grid_recovery(&acc, &grids, 1);
    let max_per_feature = report.features.iter().map(|f| f.thresholds.len()).max().unwrap_or(0);
    let mut m: Extra = vec![
        ("n_cutpoints", report.n_cutpoints() as f64),
        ("max_cuts_per_feature", max_per_feature as f64),
        ("n_matched", acc.n_matched as f64),
        ("n_missed", acc.n_missed as f64),
        ("n_spurious", acc.n_spurious as f64),
        ("recovered", rec.recovered as f64),
        ("recovered_all", rec.all() as u8 as f64),
    ];
    if let Some(b) = acc.mean_abs_bias {
        m.push(("mean_abs_bias", b));
    }
    let evaluation = if report.is_empty() {
        // no cut-points: the categorized model is the covariate-free model
        let fit = null_fit(sim.data.outcome())?;
        evaluate_fit(&RealDesign::from_columns(sim.data.n_rows(), &[]), &fit, &sim.data, None, 0)?.0
    } else {
        refit_categorized(&sim.data, report)?.evaluation
    };
    m.extend([("aic", evaluation.aic), ("ibs", evaluation.ibs), ("c_index", evaluation.c_index)]);
    m.extend(extra);
    Ok(m)
}

/// Unpenalized Cox model on the true log-hazard `f(x)` as a single covariate.
fn true_model_metrics(sim: &SimulatedDataset) -> Result<Extra> {
    let f = sim.truth.linear_predictor(sim.data.features());
    let design = RealDesign::from_columns(sim.data.n_rows(), &[f]);
    let fit = CoxLasso::new(&design, sim.data.outcome())?.fit(0.0, None)?;
    let (e, _) = evaluate_fit(&design, &fit, &sim.data, None, 0)?;
    Ok(vec![("aic", e.aic), ("ibs", e.ibs), ("c_index", e.c_index), ("slope", fit.beta[0])])
}

fn summarize(rows: &[MetricRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(u8, usize, usize, &str, &str), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.scenario, r.n, r.p, r.method.as_str(), r.metric.as_str())).or_default().push(r.value);
    }
    groups
        .into_iter()
        .map(|((scenario, n, p, method, metric), v)| {
            let count = v.len();
            let mean = v.iter().sum::<f64>() / count as f64;
            let sd = if count < 2 {
                0.0
            } else {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
            };
            SummaryRow { scenario, method: method.to_string(), n, p, metric: metric.to_string(), count, mean, sd }
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(rows.is_empty()).from_path(path)?;
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_outputs(report: &BenchmarkReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut scenarios: Vec<u8> = report.rows.iter().map(|r| r.scenario).collect();
    scenarios.sort_unstable();
    scenarios.dedup();
    let long_header = ["scenario", "method", "replicate", "n", "p", "metric", "value", "seed"];
    for s in scenarios {
        let rows: Vec<&MetricRow> = report.rows.iter().filter(|r| r.scenario == s).collect();
        write_csv(&dir.join(format!("scenario_{s}.csv")), &rows, &long_header)?;
    }
    write_csv(&dir.join("summary.csv"), &report.summary, &["scenario", "method", "n", "p", "metric", "count", "mean", "sd"])?;
    write_csv(&dir.join("timing.csv"), &report.timings, &["scenario", "method", "replicate", "n", "p", "seconds"])?;
    write_csv(
        &dir.join("failures.csv"),
        &report.failures,
        &["scenario", "method", "replicate", "n", "p", "seed", "message"],
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_replicate_smoke() {
        let cfg = BenchmarkConfig {
            scenarios: vec![ScenarioConfig::for_scenario(1, 300, 9)],
            methods: vec![Method::Bini, Method::Mini],
            replicates: 1,
            grid: GridConfig { bins: 20, ..Default::default() },
            n_folds: 5,
            ..Default::default()
        };
        let report = run_benchmark(&cfg, None).unwrap();
        assert!(report.failures.is_empty(), "{:?}", report.failures);
        for m in ["bini", "mini"] {
            assert_eq!(report.values(1, m, "aic").len(), 1);
            assert_eq!(report.summary_for(1, m, "n_cutpoints").unwrap().sd, 0.0);
        }
        assert_eq!(report.values(1, TRUE_MODEL, "ibs").len(), 1);
    }
}
