//! IBS, Harrell's C and AIC for the true model and for a covariate-free model.
//!
//! ```bash
//! cargo run --release --example evaluation_metrics
//! ```

use binilasso::cox::{breslow_from_lp, RiskSets};
use binilasso::metrics::{c_index, default_time_grid, ibs};
use binilasso::simgen::{simulate, ScenarioConfig};

fn main() -> binilasso::Result<()> {
    let sim = simulate(&ScenarioConfig::for_scenario(1, 1000, 2))?;
    let outcome = sim.data.outcome();
    let risk = RiskSets::new(outcome)?;
    let grid = default_time_grid(outcome)?;

    let truth = sim.truth.linear_predictor(sim.data.features());
    let null = vec![0.0; truth.len()];
    for (name, lp) in [("true model", &truth), ("null model", &null)] {
        let bh = breslow_from_lp(&risk, lp);
        let score = ibs(&bh, lp, outcome, outcome, &grid)?;
        let c = c_index(lp, outcome)?;
        println!("{name:<10}  IBS {score:.4}  C {c:.3}");
    }

    // C only depends on the ordering of the scores
    let squashed: Vec<f64> = truth.iter().map(|v| v.tanh()).collect();
    println!("C after tanh: {:.3}", c_index(&squashed, outcome)?);
    Ok(())
}
