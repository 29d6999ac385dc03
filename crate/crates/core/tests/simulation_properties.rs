use binilasso::pipelines::GridConfig;
use binilasso::simgen::{run_benchmark, simulate, BenchmarkConfig, Method, ScenarioConfig, TRUE_MODEL};

#[test]
fn identical_seeds_identical_data() {
    for scenario in 1..=4 {
        let cfg = ScenarioConfig::for_scenario(scenario, 500, 17);
        assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
    }
}

#[test]
fn censoring_fraction_is_calibrated() {
    for target in [0.1, 0.3, 0.5] {
        let mut total = 0.0;
        for seed in 0..50 {
            let mut cfg = ScenarioConfig::for_scenario(1, 1000, seed);
            cfg.censor_target = target;
            let sim = simulate(&cfg).unwrap();
            total += sim.data.events().iter().filter(|&&e| !e).count() as f64 / 1000.0;
        }
        let mean = total / 50.0;
        assert!((mean - target).abs() <= 0.05, "target {target}: {mean}");
    }
}

/// Kolmogorov distance of a sample from Uniform(0, 1).
fn ks_uniform(mut u: Vec<f64>) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / n).max((i + 1) as f64 / n - v))
        .fold(0.0, f64::max)
}

#[test]
fn event_times_follow_the_exponential_law() {
    // without censoring, exp(-rate * exp(f(x)) * t) is uniform given x
    for scenario in [1, 3] {
        let mut cfg = ScenarioConfig::for_scenario(scenario, 5000, 99);
        cfg.censor_target = 0.0;
        let sim = simulate(&cfg).unwrap();
        assert!(sim.data.events().iter().all(|&e| e));
        let lp = sim.truth.linear_predictor(sim.data.features());
        let u: Vec<f64> = sim
            .data
            .times()
            .iter()
            .zip(&lp)
            .map(|(t, f)| (-cfg.baseline_rate * f.exp() * t).exp())
            .collect();
        let d = ks_uniform(u);
        // asymptotic critical value at alpha = 0.01
        assert!(d < 1.628 / 5000f64.sqrt(), "scenario {scenario}: D = {d}");
    }
}

#[test]
fn single_replicate_smoke_run() {
    let cfg = BenchmarkConfig {
        scenarios: vec![ScenarioConfig::for_scenario(1, 300, 4)],
        methods: vec![Method::Bini, Method::Mini, Method::LimitedOneStep, Method::LimitedTwoStep],
        replicates: 1,
        ..Default::default()
    };
    let start = std::time::Instant::now();
    let report = run_benchmark(&cfg, None).unwrap();
    assert!(start.elapsed().as_secs_f64() < 10.0);
    assert!(report.failures.is_empty());
    for m in ["bini", "mini", "limited_one_step", "limited_two_step"] {
        for metric in ["n_cutpoints", "aic", "ibs", "c_index"] {
            assert_eq!(report.values(1, m, metric).len(), 1, "{m} {metric}");
        }
    }
    assert!(report.summary.iter().all(|s| s.sd == 0.0));
}

#[test]
fn true_model_beats_categorized_on_average() {
    let cfg = BenchmarkConfig {
        scenarios: vec![ScenarioConfig::for_scenario(4, 1000, 10)],
        methods: vec![Method::LimitedTwoStep],
        replicates: 50,
        grid: GridConfig { bins: 20, ..Default::default() },
        n_folds: 5,
        ..Default::default()
    };
    let report = run_benchmark(&cfg, None).unwrap();
    let truth = report.summary_for(4, TRUE_MODEL, "ibs").unwrap().mean;
    let limited = report.summary_for(4, "limited_two_step", "ibs").unwrap().mean;
    assert!(truth <= limited, "true {truth} vs limited {limited}");
}
