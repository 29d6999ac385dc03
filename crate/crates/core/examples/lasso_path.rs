//! Lasso Cox path over a cumulative design, cross-validation, and a KKT check of the chosen fit.
//!
//! ```bash
//! cargo run --release --example lasso_path
//! ```

use binilasso::binarize::{build_cut_grid, cumulative_binarize, GridStrategy};
use binilasso::solver::{CoxLasso, CvConfig, LambdaRule, PathConfig};
use binilasso::simgen::{simulate, ScenarioConfig};

fn main() -> binilasso::Result<()> {
    let sim = simulate(&ScenarioConfig::for_scenario(1, 800, 5))?;
    let grid = build_cut_grid(&sim.data, 20, GridStrategy::Quantile)?;
    let x = cumulative_binarize(&sim.data, &grid)?;
    let problem = CoxLasso::new(&x, sim.data.outcome())?;

    let path = problem.fit_path(&PathConfig { n_lambdas: 20, ..Default::default() })?;
    println!("lambda      active  objective");
    for fit in &path.fits {
        println!("{:<10.5}  {:>6}  {:.6}", fit.lambda, fit.n_active(), fit.objective_value);
    }

    let cv = problem.cross_validate(&CvConfig { n_folds: 5, seed: 5, ..Default::default() })?;
    println!("\nlambda_min {:.5}  lambda_1se {:.5}", cv.lambda_min, cv.lambda_1se);
    let fit = cv.selected_fit(LambdaRule::Min);
    let kkt = problem.kkt_check(fit)?;
    println!("KKT passed: {} (worst violation {:.2e})", kkt.passed, kkt.worst_violation);

    let meta = x.column_meta();
    for &k in &fit.active_set {
        println!("  x{} > {:.3}: {:+.3}", meta[k].feature + 1, meta[k].threshold, fit.beta[k]);
    }
    Ok(())
}
