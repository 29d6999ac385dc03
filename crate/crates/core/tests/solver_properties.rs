mod common;

use binilasso::binarize::{build_cut_grid, cumulative_binarize, GridStrategy};
use binilasso::data::Outcome;
use binilasso::simgen::{simulate, ScenarioConfig};
use binilasso::solver::{Constraint, CoxLasso, CvConfig, PathConfig, PenaltyWeights};
use common::{brute_force_min, max_abs_diff, newton_cox, Instance};
use proptest::prelude::*;

#[test]
fn objective_never_above_grid_minimum() {
    for seed in 0..20 {
        let d = 1 + (seed % 2) as usize;
        let inst = Instance::random(500 + seed, 8 + (seed as usize % 13), d);
        let x = inst.design();
        let problem = CoxLasso::new(&x, Outcome::new(&inst.times, &inst.events).unwrap()).unwrap();
        let lmax = problem.lambda_max().unwrap();
        for frac in [0.6, 0.2] {
            let fit = problem.fit(frac * lmax, None).unwrap();
            let oracle = brute_force_min(&inst, frac * lmax);
            assert!(fit.objective_value <= oracle + 1e-6, "seed {seed}: {} > {oracle}", fit.objective_value);
        }
    }
}

#[test]
fn kkt_holds_along_path() {
    let sim = simulate(&ScenarioConfig::for_scenario(2, 300, 3)).unwrap();
    let grid = build_cut_grid(&sim.data, 10, GridStrategy::Quantile).unwrap();
    let x = cumulative_binarize(&sim.data, &grid).unwrap();
    let problem = CoxLasso::new(&x, sim.data.outcome()).unwrap();
    let path = problem.fit_path(&PathConfig { n_lambdas: 30, ..Default::default() }).unwrap();
    for fit in &path.fits {
        assert!(fit.converged);
        assert!(problem.kkt_check(fit).unwrap().passed, "lambda {}", fit.lambda);
    }
}

#[test]
fn kkt_detects_perturbed_coefficient() {
    let inst = Instance::from_model(2, 150, &[1.0, -0.5, 0.0]);
    let x = inst.design();
    let problem = CoxLasso::new(&x, Outcome::new(&inst.times, &inst.events).unwrap()).unwrap();
    let mut fit = problem.fit(0.2 * problem.lambda_max().unwrap(), None).unwrap();
    let k = fit.active_set[0];
    fit.beta[k] += 0.1;
    let cert = problem.kkt_check(&fit).unwrap();
    assert!(!cert.passed);
    assert_eq!(cert.worst_coordinate, Some(k));
}

#[test]
fn unpenalized_fit_matches_newton() {
    for seed in 0..10 {
        let inst = Instance::from_model(seed, 200, &[0.8, -0.5, 0.3]);
        let x = inst.design();
        let problem = CoxLasso::new(&x, Outcome::new(&inst.times, &inst.events).unwrap()).unwrap();
        let fit = problem.fit(0.0, None).unwrap();
        let newton = newton_cox(&inst);
        assert!(max_abs_diff(&fit.beta, &newton) < 1e-6, "seed {seed}: {:?} vs {newton:?}", fit.beta);
    }
}

#[test]
fn zero_at_and_above_lambda_max() {
    let inst = Instance::random(77, 30, 5);
    let x = inst.design();
    let problem = CoxLasso::new(&x, Outcome::new(&inst.times, &inst.events).unwrap()).unwrap();
    let lmax = problem.lambda_max().unwrap();
    for scale in [1.0, 1.5, 10.0] {
        assert!(problem.fit(lmax * scale, None).unwrap().beta.iter().all(|&b| b == 0.0));
    }
    assert!(problem.fit(lmax * 0.9, None).unwrap().beta.iter().any(|&b| b != 0.0));
}

#[test]
fn cross_validation_independent_of_thread_count() {
    let sim = simulate(&ScenarioConfig::for_scenario(1, 400, 6)).unwrap();
    let grid = build_cut_grid(&sim.data, 20, GridStrategy::Quantile).unwrap();
    let x = cumulative_binarize(&sim.data, &grid).unwrap();
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let problem = CoxLasso::new(&x, sim.data.outcome()).unwrap();
            problem.cross_validate(&CvConfig { n_folds: 5, seed: 6, ..Default::default() }).unwrap()
        })
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn lambda_1se_is_largest_within_one_sd() {
    let sim = simulate(&ScenarioConfig::for_scenario(1, 300, 9)).unwrap();
    let grid = build_cut_grid(&sim.data, 10, GridStrategy::Quantile).unwrap();
    let x = cumulative_binarize(&sim.data, &grid).unwrap();
    let cv = CoxLasso::new(&x, sim.data.outcome())
        .unwrap()
        .cross_validate(&CvConfig { n_folds: 5, seed: 1, ..Default::default() })
        .unwrap();
    let m = &cv.mean_cv_deviance;
    assert!(m.iter().all(|&v| v >= m[cv.index_min]));
    let bound = m[cv.index_min] + cv.sd[cv.index_min];
    let first_within = m.iter().position(|&v| v <= bound).unwrap();
    assert_eq!(cv.index_1se, first_within);
    assert!(cv.lambda_1se >= cv.lambda_min);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn nonnegative_mode_is_exact(seed in 0u64..10_000, frac in 0.01f64..1.0) {
        let inst = Instance::random(seed, 25, 4);
        let x = inst.design();
        let problem = CoxLasso::new(&x, Outcome::new(&inst.times, &inst.events).unwrap())
            .unwrap()
            .constraint(Constraint::NonNegative);
        let fit = problem.fit(frac * problem.lambda_max().unwrap(), None).unwrap();
        prop_assert!(fit.beta.iter().all(|&b| b >= 0.0));
        prop_assert!(problem.kkt_check(&fit).unwrap().passed);
    }

    #[test]
    fn penalty_scale_equivariance(seed in 0u64..10_000, c in 0.1f64..10.0) {
        let inst = Instance::from_model(seed, 80, &[1.0, 0.0, -0.7]);
        let x = inst.design();
        let out = Outcome::new(&inst.times, &inst.events).unwrap();
        let w = vec![1.0, 0.5, 2.0];
        let base = CoxLasso::new(&x, out).unwrap().weights(PenaltyWeights::new(w.clone()).unwrap()).unwrap();
        let lambda = 0.3 * base.lambda_max().unwrap();
        let scaled = CoxLasso::new(&x, out)
            .unwrap()
            .weights(PenaltyWeights::new(w.iter().map(|v| v * c).collect()).unwrap())
            .unwrap();
        let a = base.fit(lambda, None).unwrap();
        let b = scaled.fit(lambda / c, None).unwrap();
        prop_assert!(max_abs_diff(&a.beta, &b.beta) < 1e-8);
    }

    #[test]
    fn path_entry_lambda_is_consistent(seed in 0u64..10_000) {
        let inst = Instance::random(seed, 30, 5);
        let x = inst.design();
        let problem = CoxLasso::new(&x, Outcome::new(&inst.times, &inst.events).unwrap()).unwrap();
        let path = problem.fit_path(&PathConfig { n_lambdas: 15, lambda_ratio: Some(0.05) }).unwrap();
        for (fit, &l) in path.fits.iter().zip(&path.lambdas) {
            prop_assert_eq!(fit.lambda, l);
            let pen: f64 = fit.beta.iter().map(|b| b.abs()).sum();
            prop_assert!((fit.objective_value - fit.nll_value - l * pen).abs() < 1e-12);
        }
        for k in 0..5 {
            let first = path.fits.iter().find(|f| f.beta[k] != 0.0).map(|f| f.lambda);
            prop_assert_eq!(path.entry_lambda[k], first);
        }
    }
}
