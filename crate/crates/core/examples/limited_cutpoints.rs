//! At most `m` cut-points per feature: the two-step procedure (per-feature ranking, then one
//! combined lasso) and the one-step procedure (ranking on a single global path).
//!
//! ```bash
//! cargo run --release --example limited_cutpoints
//! ```

use binilasso::pipelines::{limited_one_step, limited_two_step, GridConfig, LimitMode, LimitedCutConfig};
use binilasso::simgen::{simulate, ScenarioConfig};
use binilasso::solver::{CvConfig, PathConfig};

fn main() -> binilasso::Result<()> {
    let sim = simulate(&ScenarioConfig::for_scenario(4, 1000, 8))?;
    let grid = GridConfig::default();

    let two = LimitedCutConfig::new(2, LimitMode::TwoStep)?;
    let report = limited_two_step(&sim.data, &two, &grid, &CvConfig { seed: 8, ..Default::default() })?;
    println!("two-step, m = 2");
    for f in &report.features {
        println!("  {}: {:.3?}", f.name, f.thresholds);
    }

    let sim2 = simulate(&ScenarioConfig::for_scenario(1, 1000, 8))?;
    let one = LimitedCutConfig::new(2, LimitMode::OneStep)?;
    let report = limited_one_step(&sim2.data, &one, &grid, &PathConfig::default())?;
    println!("one-step, m = 2 (effects from the unpenalized refit)");
    for f in &report.features {
        println!("  {}: {:.3?} effects {:.3?}", f.name, f.thresholds, f.effects);
    }
    Ok(())
}
