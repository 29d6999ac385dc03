//! Draw one dataset from each simulation scenario and summarize it.
//!
//! ```bash
//! cargo run --release --example simulate_scenarios
//! ```

use binilasso::simgen::{simulate, ScenarioConfig};

fn main() -> binilasso::Result<()> {
    for scenario in 1..=4 {
        let cfg = ScenarioConfig::for_scenario(scenario, 1000, 42);
        let sim = simulate(&cfg)?;
        let censored = sim.data.events().iter().filter(|&&e| !e).count();
        println!(
            "scenario {scenario}: n={} p={} active={:?} censored={:.1}% cuts={:?}",
            sim.data.n_rows(),
            sim.data.n_features(),
            sim.truth.active,
            100.0 * censored as f64 / cfg.n as f64,
            sim.truth.cuts[0],
        );
    }

    // the step shape of scenario 1 and the ramps of scenario 3
    let step = simulate(&ScenarioConfig::for_scenario(1, 10, 0))?.truth;
    let ramp = simulate(&ScenarioConfig::for_scenario(3, 10, 0))?.truth;
    println!("\n   x   step  ramp");
    for k in 0..=10 {
        let x = k as f64 / 10.0;
        println!("{x:4.1} {:6.2} {:5.2}", step.shape(x), ramp.shape(x));
    }
    Ok(())
}
