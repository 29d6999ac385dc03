//! Univariate screening by AIC and IBS on a wide dataset where two features carry signal.
//!
//! ```bash
//! cargo run --release --example screening
//! ```

use binilasso::pipelines::screen_features;
use binilasso::simgen::{simulate, ScenarioConfig};

fn main() -> binilasso::Result<()> {
    let mut cfg = ScenarioConfig::for_scenario(2, 500, 4);
    cfg.p = 40;
    cfg.sparsity = 0.05;
    let sim = simulate(&cfg)?;
    println!("active features: {:?}", sim.truth.active.iter().map(|j| format!("x{}", j + 1)).collect::<Vec<_>>());

    let result = screen_features(&sim.data, 3)?;
    println!("selected (top 3 per metric): {:?}", result.selected);
    let mut rows: Vec<_> = result.table.iter().filter(|r| r.rank_aic.is_some_and(|r| r <= 5)).collect();
    rows.sort_by_key(|r| r.rank_aic);
    for r in rows {
        println!("  {:<4} AIC {:.1} (#{}) IBS {:.4} (#{})", r.name, r.aic.unwrap(), r.rank_aic.unwrap(), r.ibs.unwrap_or(f64::NAN), r.rank_ibs.unwrap_or(0));
    }
    Ok(())
}
