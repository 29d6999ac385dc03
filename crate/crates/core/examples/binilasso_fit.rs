//! biniLasso on simulated data with two true cut-points per feature, followed by the
//! categorized refit and a comparison against the truth.
//!
//! ```bash
//! cargo run --release --example binilasso_fit
//! ```

use binilasso::metrics::cutpoint_accuracy;
use binilasso::pipelines::{fit_binilasso, refit_categorized, GridConfig};
use binilasso::simgen::{simulate, ScenarioConfig};
use binilasso::solver::CvConfig;

fn main() -> binilasso::Result<()> {
    let sim = simulate(&ScenarioConfig::for_scenario(1, 2000, 11))?;
    let cv = CvConfig { seed: 11, ..Default::default() };
    let (report, fit) = fit_binilasso(&sim.data, &GridConfig::default(), &cv)?;

    println!("lambda {:.5}, {} cut-points", fit.lambda, report.n_cutpoints());
    for f in &report.features {
        for (t, e) in f.thresholds.iter().zip(&f.effects) {
            println!("  {} > {t:.3}: {e:+.3}", f.name);
        }
    }

    let truth = sim.truth.named_cuts(sim.data.feature_names());
    let acc = cutpoint_accuracy(&truth, &report.named_thresholds());
    println!("\nmatched {} / {}, mean |bias| {:.4}", acc.n_matched, acc.n_matched + acc.n_missed, acc.mean_abs_bias.unwrap_or(f64::NAN));

    let refit = refit_categorized(&sim.data, &report)?;
    let e = &refit.evaluation;
    println!("refit: AIC {:.1}  IBS {:.4}  C {:.3}", e.aic, e.ibs, e.c_index);
    Ok(())
}
