//! miniLasso: univariate fits per indicator, leave-one-out predictors, and a non-negative
//! lasso over them. Compared with biniLasso on the same data and folds.
//!
//! ```bash
//! cargo run --release --example minilasso_fit
//! ```

use binilasso::pipelines::{fit_binilasso, fit_minilasso_pipeline, GridConfig};
use binilasso::simgen::{simulate, ScenarioConfig};
use binilasso::solver::CvConfig;
use binilasso::unilasso::{LooMethod, MiniLassoConfig};

fn main() -> binilasso::Result<()> {
    let sim = simulate(&ScenarioConfig::for_scenario(1, 2000, 21))?;
    let grid = GridConfig::default();
    let cv = CvConfig { seed: 21, ..Default::default() };

    let (mini, fit) = fit_minilasso_pipeline(&sim.data, &grid, &MiniLassoConfig { cv, loo: LooMethod::Exact })?;
    let (bini, _) = fit_binilasso(&sim.data, &grid, &cv)?;
    println!("cut-points: mini {}  bini {}", mini.n_cutpoints(), bini.n_cutpoints());

    let degenerate = fit.univariate.degenerate.iter().filter(|&&d| d).count();
    println!("degenerate univariate columns: {degenerate}, LOO fallbacks: {}", fit.loo_fallbacks);
    println!("min theta {:.3e}", fit.theta.iter().copied().fold(f64::INFINITY, f64::min));

    for f in &mini.features {
        println!("{}:", f.name);
        for (t, e) in f.thresholds.iter().zip(&f.effects) {
            println!("  > {t:.3}: {e:+.3}");
        }
    }
    Ok(())
}
