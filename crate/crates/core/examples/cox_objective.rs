//! Breslow partial likelihood, its gradient, and the baseline hazard for a fixed coefficient.
//!
//! ```bash
//! cargo run --release --example cox_objective
//! ```

use binilasso::cox::{breslow_baseline, fit_univariate, nll, nll_gradient, predict_survival, RiskSets};
use binilasso::design::RealDesign;
use binilasso::simgen::{simulate, ScenarioConfig};

fn main() -> binilasso::Result<()> {
    let sim = simulate(&ScenarioConfig::for_scenario(1, 500, 3))?;
    let ds = &sim.data;
    let x = RealDesign::from_rows(ds.features());

    for beta in [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]] {
        let value = nll(&x, &beta, ds.outcome())?;
        let grad = nll_gradient(&x, &beta, ds.outcome())?;
        println!("beta {beta:?}: nll {value:.5} gradient {grad:.5?}");
    }

    let risk = RiskSets::new(ds.outcome())?;
    let x1 = ds.feature(0).to_vec();
    let uni = fit_univariate(&risk, &x1, 0.0, 50, 1e-10);
    println!("\nunivariate slope of x1: {:.4} ({} Newton steps)", uni.beta, uni.iterations);

    let beta = [uni.beta, 0.0];
    let bh = breslow_baseline(&x, &beta, ds.outcome())?;
    let times = [2.0, 5.0, 10.0];
    for v in [0.1, 0.5, 0.9] {
        let s = predict_survival(&bh, uni.beta * v, &times);
        println!("x1 = {v}: S(t) at {times:?} = {s:.3?}");
    }
    Ok(())
}
