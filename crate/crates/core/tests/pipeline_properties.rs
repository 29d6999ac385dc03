mod common;

use binilasso::pipelines::{
    fit_binilasso, limited_one_step, limited_two_step, refit_categorized, screen_features, CutpointReport,
    FeatureCuts, GridConfig, LimitMode, LimitedCutConfig, Procedure, RankingRule, ReportMethod,
};
use binilasso::simgen::{simulate, ScenarioConfig};
use binilasso::solver::{CvConfig, PathConfig};
use binilasso::Error;
use common::{newton_cox, Instance};
use proptest::prelude::*;

fn hand_report(features: Vec<(&str, Vec<f64>)>) -> CutpointReport {
    CutpointReport {
        method: ReportMethod::Bini,
        procedure: Procedure::Full,
        max_cuts: None,
        lambda: 0.0,
        features: features
            .into_iter()
            .map(|(name, thresholds)| FeatureCuts {
                name: name.into(),
                effects: vec![0.0; thresholds.len()],
                thresholds,
            })
            .collect(),
        cv: None,
        grid: None,
        converged: true,
        warnings: Vec::new(),
    }
}

fn assert_on_grid(report: &CutpointReport, grid: &binilasso::binarize::CutGrid) {
    for f in &report.features {
        let fg = grid.features.iter().find(|g| g.name == f.name).unwrap();
        assert!(f.thresholds.windows(2).all(|w| w[0] < w[1]));
        for t in &f.thresholds {
            assert!(fg.thresholds.contains(t), "{} {t} is not a grid threshold", f.name);
        }
    }
}

#[test]
fn single_threshold_refit_matches_newton() {
    let sim = simulate(&ScenarioConfig::for_scenario(1, 400, 12)).unwrap();
    let ds = &sim.data;
    let refit = refit_categorized(ds, &hand_report(vec![("x1", vec![0.5])])).unwrap();
    let col: Vec<f64> = ds.feature(0).iter().map(|&v| (v > 0.5) as u8 as f64).collect();
    let inst = Instance { x: vec![col], times: ds.times().to_vec(), events: ds.events().to_vec() };
    let oracle = newton_cox(&inst);
    assert!((refit.fit.beta[0] - oracle[0]).abs() < 1e-6);
}

#[test]
fn refit_errors() {
    let ds = simulate(&ScenarioConfig::for_scenario(1, 200, 1)).unwrap().data;
    assert!(matches!(refit_categorized(&ds, &hand_report(vec![])), Err(Error::EmptyReport)));
    let dup = hand_report(vec![("x1", vec![0.4, 0.4])]);
    assert!(matches!(refit_categorized(&ds, &dup), Err(Error::SingularRefit(_))));
    let unknown = hand_report(vec![("nope", vec![0.4])]);
    assert!(matches!(refit_categorized(&ds, &unknown), Err(Error::MissingColumn(_))));
}

#[test]
fn aic_difference_of_nested_refits() {
    let ds = simulate(&ScenarioConfig::for_scenario(1, 500, 2)).unwrap().data;
    let small = refit_categorized(&ds, &hand_report(vec![("x1", vec![0.3])])).unwrap();
    let big = refit_categorized(&ds, &hand_report(vec![("x1", vec![0.3, 0.7]), ("x2", vec![0.5])])).unwrap();
    let log_pl = |f: &binilasso::solver::CoxFit| -(f.n_obs as f64) * f.nll_value;
    let want = 2.0 * 2.0 - 2.0 * (log_pl(&big.fit) - log_pl(&small.fit));
    let got = big.evaluation.aic - small.evaluation.aic;
    assert!((got - want).abs() < 1e-9 * big.evaluation.aic.abs());
}

#[test]
fn binilasso_is_seed_deterministic_and_on_grid() {
    let ds = simulate(&ScenarioConfig::for_scenario(1, 600, 5)).unwrap().data;
    let grid_cfg = GridConfig { bins: 20, ..Default::default() };
    let cv = CvConfig { n_folds: 5, seed: 5, ..Default::default() };
    let (a, _) = fit_binilasso(&ds, &grid_cfg, &cv).unwrap();
    let (b, _) = fit_binilasso(&ds, &grid_cfg, &cv).unwrap();
    assert_eq!(a.to_json_pretty().unwrap(), b.to_json_pretty().unwrap());
    assert_on_grid(&a, &grid_cfg.build(&ds).unwrap());
    let back = CutpointReport::from_json(&a.to_json_pretty().unwrap()).unwrap();
    assert_eq!(back, a);
}

#[test]
fn one_step_respects_cap() {
    for seed in 0..5 {
        let ds = simulate(&ScenarioConfig::for_scenario(1, 400, seed)).unwrap().data;
        let grid_cfg = GridConfig { bins: 20, ..Default::default() };
        for m in 1..=3 {
            let cfg = LimitedCutConfig::new(m, LimitMode::OneStep).unwrap();
            let report = limited_one_step(&ds, &cfg, &grid_cfg, &PathConfig::default()).unwrap();
            assert!(report.features.iter().all(|f| f.thresholds.len() <= m));
            assert_on_grid(&report, &grid_cfg.build(&ds).unwrap());
        }
    }
}

#[test]
fn limit_zero_is_rejected() {
    assert!(LimitedCutConfig::new(0, LimitMode::TwoStep).is_err());
}

#[test]
fn screening_finds_the_single_signal() {
    let mut hits = 0;
    for seed in 0..100 {
        let mut cfg = ScenarioConfig::for_scenario(2, 500, seed);
        cfg.sparsity = 0.1;
        let sim = simulate(&cfg).unwrap();
        assert_eq!(sim.truth.active, vec![0]);
        let result = screen_features(&sim.data, 1).unwrap();
        if result.selected.iter().any(|s| s == "x1") {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits} of 100");
}

#[test]
fn screening_rejects_zero_top() {
    let ds = simulate(&ScenarioConfig::for_scenario(2, 100, 0)).unwrap().data;
    assert!(matches!(screen_features(&ds, 0), Err(Error::InvalidConfig(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn two_step_never_exceeds_cap(seed in 0u64..10_000, m in 1usize..4, max_abs in proptest::bool::ANY) {
        let ds = simulate(&ScenarioConfig::for_scenario(4, 300, seed)).unwrap().data;
        let grid_cfg = GridConfig { bins: 15, ..Default::default() };
        let mut cfg = LimitedCutConfig::new(m, LimitMode::TwoStep).unwrap();
        if max_abs {
            cfg.ranking_rule = RankingRule::MaxAbsCoef;
        }
        let cv = CvConfig { n_folds: 5, seed, ..Default::default() };
        let report = limited_two_step(&ds, &cfg, &grid_cfg, &cv).unwrap();
        prop_assert!(report.features.iter().all(|f| f.thresholds.len() <= m));
        assert_on_grid(&report, &grid_cfg.build(&ds).unwrap());
    }
}
