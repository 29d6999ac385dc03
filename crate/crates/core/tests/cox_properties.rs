mod common;

use binilasso::cox::{breslow_baseline, nll, nll_curvature, nll_gradient, predict_survival, RiskSets};
use binilasso::data::Outcome;
use common::{central_diff, naive_nll, rel_err, Instance};
use proptest::prelude::*;

fn sizes(seed: u64) -> (usize, usize) {
    (5 + (seed as usize * 7) % 26, 1 + (seed as usize * 3) % 10)
}

#[test]
fn nll_matches_direct_summation() {
    for seed in 0..50 {
        let (n, d) = sizes(seed);
        let inst = Instance::random(seed, n, d);
        let beta: Vec<f64> = (0..d).map(|k| 0.3 * (k as f64 - 1.0)).collect();
        let out = Outcome::new(&inst.times, &inst.events).unwrap();
        let got = nll(&inst.design(), &beta, out).unwrap();
        let want = naive_nll(&inst.lp(&beta), &inst.times, &inst.events);
        assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "seed {seed}: {got} vs {want}");
    }
}

#[test]
fn gradient_and_curvature_match_finite_differences() {
    for seed in 0..120 {
        let (n, d) = sizes(seed);
        let inst = Instance::random(1000 + seed, n, d);
        let x = inst.design();
        let out = Outcome::new(&inst.times, &inst.events).unwrap();
        let beta: Vec<f64> = (0..d).map(|k| ((seed + k as u64) % 5) as f64 * 0.2 - 0.4).collect();

        let f = |b: &[f64]| nll(&x, b, out).unwrap();
        let grad = nll_gradient(&x, &beta, out).unwrap();
        assert!(rel_err(&grad, &central_diff(&f, &beta, 1e-5)) < 1e-6, "gradient, seed {seed}");

        let curv = nll_curvature(&x, &beta, out).unwrap();
        let fd_curv: Vec<f64> = (0..d)
            .map(|k| {
                let g = |b: &[f64]| nll_gradient(&x, b, out).unwrap()[k];
                central_diff(&g, &beta, 1e-5)[k]
            })
            .collect();
        assert!(rel_err(&curv, &fd_curv) < 1e-5, "curvature, seed {seed}");
    }
}

#[test]
fn analytic_hessian_diagonal_matches_curvature() {
    let inst = Instance::random(9, 25, 4);
    let beta = [0.5, -0.2, 0.1, 0.0];
    let out = Outcome::new(&inst.times, &inst.events).unwrap();
    let curv = nll_curvature(&inst.design(), &beta, out).unwrap();
    let (_, h) = common::naive_derivatives(&inst, &beta);
    let diag: Vec<f64> = (0..4).map(|k| h[(k, k)]).collect();
    assert!(rel_err(&curv, &diag) < 1e-12);
}

#[test]
fn baseline_and_survival_are_monotone() {
    let inst = Instance::random(4, 30, 2);
    let out = Outcome::new(&inst.times, &inst.events).unwrap();
    let bh = breslow_baseline(&inst.design(), &[0.4, -0.3], out).unwrap();
    assert!(bh.cumulative_hazard.windows(2).all(|w| w[1] >= w[0]));
    assert!(bh.cumulative_hazard.iter().all(|&h| h >= 0.0));
    let times: Vec<f64> = (0..40).map(|k| k as f64 * 0.5).collect();
    let lo = predict_survival(&bh, -1.0, &times);
    let hi = predict_survival(&bh, 1.0, &times);
    assert!(lo.windows(2).all(|w| w[1] <= w[0]));
    assert!(lo.iter().zip(&hi).all(|(a, b)| b <= a));
    assert_eq!(predict_survival(&bh, 0.3, &[0.0])[0], 1.0);
}

#[test]
fn risk_sets_are_nested() {
    let inst = Instance::random(12, 30, 1);
    let risk = RiskSets::new(Outcome::new(&inst.times, &inst.events).unwrap()).unwrap();
    let groups = risk.groups();
    let first = groups[0].time;
    assert_eq!(groups[0].start as usize, inst.times.iter().filter(|&&t| t < first).count());
    assert!(groups.windows(2).all(|w| w[1].start > w[0].start));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nll_is_translation_invariant(seed in 0u64..10_000, c in -50.0f64..50.0) {
        let inst = Instance::random(seed, 15, 1);
        let risk = RiskSets::new(Outcome::new(&inst.times, &inst.events).unwrap()).unwrap();
        let lp = inst.lp(&[0.7]);
        let shifted: Vec<f64> = lp.iter().map(|v| v + c).collect();
        prop_assert!((risk.nll(&lp) - risk.nll(&shifted)).abs() < 1e-12 * risk.nll(&lp).abs().max(1.0));
    }

    #[test]
    fn nll_depends_only_on_time_ranks(seed in 0u64..10_000) {
        let inst = Instance::random(seed, 20, 3);
        let warped: Vec<f64> = inst.times.iter().map(|t| t.powi(3) + t.exp()).collect();
        let beta = [0.3, -0.6, 1.1];
        let x = inst.design();
        let a = Outcome::new(&inst.times, &inst.events).unwrap();
        let b = Outcome::new(&warped, &inst.events).unwrap();
        prop_assert_eq!(nll(&x, &beta, a).unwrap(), nll(&x, &beta, b).unwrap());
        prop_assert_eq!(nll_gradient(&x, &beta, a).unwrap(), nll_gradient(&x, &beta, b).unwrap());
        let ga: Vec<_> = RiskSets::new(a).unwrap().groups().iter().map(|g| (g.start, g.end)).collect();
        let gb: Vec<_> = RiskSets::new(b).unwrap().groups().iter().map(|g| (g.start, g.end)).collect();
        prop_assert_eq!(ga, gb);
    }

    #[test]
    fn nll_is_midpoint_convex(
        seed in 0u64..10_000,
        a in proptest::collection::vec(-3.0f64..3.0, 3),
        b in proptest::collection::vec(-3.0f64..3.0, 3),
    ) {
        let inst = Instance::random(seed, 20, 3);
        let x = inst.design();
        let out = Outcome::new(&inst.times, &inst.events).unwrap();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(u, v)| 0.5 * (u + v)).collect();
        let f = |beta: &[f64]| nll(&x, beta, out).unwrap();
        prop_assert!(f(&mid) <= 0.5 * (f(&a) + f(&b)) + 1e-12);
    }
}
