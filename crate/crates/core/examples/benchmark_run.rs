//! A small simulation benchmark: two methods, a few replicates, long-format CSV output.
//!
//! ```bash
//! cargo run --release --example benchmark_run -- /tmp/bench
//! ```

use std::path::PathBuf;

use binilasso::pipelines::GridConfig;
use binilasso::simgen::{run_benchmark, BenchmarkConfig, Method, ScenarioConfig, TRUE_MODEL};

fn main() -> binilasso::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from);
    let cfg = BenchmarkConfig {
        scenarios: vec![ScenarioConfig::for_scenario(1, 500, 1)],
        methods: vec![Method::Bini, Method::Mini],
        replicates: 4,
        grid: GridConfig { bins: 25, ..Default::default() },
        n_folds: 5,
        ..Default::default()
    };
    let report = run_benchmark(&cfg, out.as_deref())?;
    println!("{} rows, {} failures", report.rows.len(), report.failures.len());
    for method in ["bini", "mini", TRUE_MODEL] {
        for metric in ["n_cutpoints", "recovered_all", "ibs"] {
            if let Some(s) = report.summary_for(1, method, metric) {
                println!("{method:<10} {metric:<14} mean {:.4} sd {:.4}", s.mean, s.sd);
            }
        }
    }
    if let Some(dir) = out {
        println!("CSV files written to {}", dir.display());
    }
    Ok(())
}
