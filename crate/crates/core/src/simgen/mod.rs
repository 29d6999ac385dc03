//! Seeded simulation scenarios with known cut-points, and the benchmark runner.

mod benchmark;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};

pub use benchmark::{
    run_benchmark, BenchmarkConfig, BenchmarkReport, Method, MetricRow, ReplicateFailure, SummaryRow, TimingRow, TRUE_MODEL,
};

/// Generative settings for one scenario.
///
/// Scenarios 1, 2 and 4 use step functions with jumps at `true_cuts`; scenario 3 ramps
/// linearly across `cut_regions`. Each active feature contributes the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub scenario: u8,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub true_cuts: Vec<f64>,
    /// Log-hazard level on each interval; one more entry than cuts (or regions).
    pub effect_sizes: Vec<f64>,
    pub cut_regions: Vec<[f64; 2]>,
    pub sparsity: f64,
    pub censor_target: f64,
    pub baseline_rate: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::for_scenario(1, 500, 0)
    }
}

impl ScenarioConfig {
    /// Default settings for scenario 1..=4.
    pub fn for_scenario(scenario: u8, n: usize, seed: u64) -> Self {
        let (p, sparsity) = match scenario {
            2 => (10, 0.2),
            4 => (5, 1.0),
            _ => (2, 1.0),
        };
        Self {
            scenario,
            n,
            p,
            seed,
            true_cuts: vec![0.3, 0.7],
            effect_sizes: vec![0.0, 1.0, 2.0],
            cut_regions: vec![[0.25, 0.40], [0.60, 0.80]],
            sparsity,
            censor_target: 0.30,
            baseline_rate: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(1..=4).contains(&self.scenario) {
            return bad(format!("scenario must be 1..=4, got {}", self.scenario));
        }
        if self.n < 2 || self.p < 1 {
            return bad(format!("need n >= 2 and p >= 1, got n={} p={}", self.n, self.p));
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return bad(format!("sparsity must lie in (0, 1], got {}", self.sparsity));
        }
        if !(self.censor_target >= 0.0 && self.censor_target < 1.0) {
            return bad(format!("censor_target must lie in [0, 1), got {}", self.censor_target));
        }
        if !(self.baseline_rate > 0.0 && self.baseline_rate.is_finite()) {
            return bad(format!("baseline_rate must be positive, got {}", self.baseline_rate));
        }
        if self.effect_sizes.iter().any(|e| !e.is_finite()) {
            return bad("effect sizes must be finite".into());
        }
        let inside = |v: f64| v > 0.0 && v < 1.0;
        if self.scenario == 3 {
            if self.effect_sizes.len() != self.cut_regions.len() + 1 {
                return bad("scenario 3 needs one more effect size than cut regions".into());
            }
            let flat: Vec<f64> = self.cut_regions.iter().flatten().copied().collect();
            if flat.iter().any(|&v| !inside(v)) || flat.windows(2).any(|w| !(w[0] < w[1])) {
                return bad("cut regions must be increasing, disjoint and inside (0, 1)".into());
            }
        } else {
            if self.effect_sizes.len() != self.true_cuts.len() + 1 {
                return bad("need one more effect size than true cuts".into());
            }
            if self.true_cuts.iter().any(|&v| !inside(v)) || self.true_cuts.windows(2).any(|w| !(w[0] < w[1])) {
                return bad("true cuts must be strictly increasing inside (0, 1)".into());
            }
        }
        Ok(())
    }

    pub fn n_active(&self) -> usize {
        ((self.sparsity * self.p as f64).round() as usize).clamp(1, self.p)
    }
}

/// Known generative truth of a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub scenario: u8,
    pub active: Vec<usize>,
    /// Per-feature true cut-points (empty for inactive features). Scenario 3 uses region midpoints.
    pub cuts: Vec<Vec<f64>>,
    pub effect_sizes: Vec<f64>,
    pub cut_regions: Vec<[f64; 2]>,
    pub baseline_rate: f64,
    /// Upper bound of the uniform censoring distribution; `None` without censoring.
    pub censoring_bound: Option<f64>,
}

impl GroundTruth {
    /// Contribution of one active feature value to the log-hazard.
    pub fn shape(&self, x: f64) -> f64 {
        let e = &self.effect_sizes;
        if self.scenario == 3 {
            let mut level = e[0];
            for (r, [a, b]) in self.cut_regions.iter().enumerate() {
                if x >= *b {
                    level = e[r + 1];
                } else if x > *a {
                    return e[r] + (e[r + 1] - e[r]) * (x - a) / (b - a);
                } else {
                    break;
                }
            }
            level
        } else {
            let cuts = &self.cuts[self.active[0]];
            e[cuts.partition_point(|&c| c < x)]
        }
    }

    /// True log-hazard of every row.
    pub fn linear_predictor(&self, features: &Array2<f64>) -> Vec<f64> {
        features
            .rows()
            .into_iter()
            .map(|row| self.active.iter().map(|&j| self.shape(row[j])).sum())
            .collect()
    }

    /// True cut-points keyed by feature name, active features only.
    pub fn named_cuts(&self, names: &[String]) -> Vec<(String, Vec<f64>)> {
        self.active.iter().map(|&j| (names[j].clone(), self.cuts[j].clone())).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDataset {
    pub data: SurvivalDataset,
    pub truth: GroundTruth,
    pub config: ScenarioConfig,
}

/// Independent child seed for replicate `index` of a master seed.
pub fn child_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// Expected censored fraction under Uniform(0, c) censoring for exponential hazards `h`.
fn expected_censoring(hazards: &[f64], c: f64) -> f64 {
    hazards
        .iter()
        .map(|&h| {
            let x = h * c;
            if x < 1e-8 {
                1.0 - x / 2.0
            } else {
                -(-x).exp_m1() / x
            }
        })
        .sum::<f64>()
        / hazards.len() as f64
}

/// Censoring bound `c` whose expected censored fraction equals `target`.
pub fn calibrate_censoring(hazards: &[f64], target: f64) -> Option<f64> {
    if target <= 0.0 {
        return None;
    }
    // fraction decreases from 1 to 0 as c grows
    let (mut lo, mut hi) = (1e-12f64, 1.0f64);
    while expected_censoring(hazards, hi) > target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if expected_censoring(hazards, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-14 {
            break;
        }
    }
    Some((lo * hi).sqrt())
}

/// Draws one dataset from the scenario.
pub fn simulate(cfg: &ScenarioConfig) -> Result<SimulatedDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n, p) = (cfg.n, cfg.p);
    let features = Array2::from_shape_fn((n, p), |_| rng.gen::<f64>());
    let active: Vec<usize> = (0..cfg.n_active()).collect();
    let cuts_shape = if cfg.scenario == 3 {
        cfg.cut_regions.iter().map(|[a, b]| 0.5 * (a + b)).collect()
    } else {
        cfg.true_cuts.clone()
    };
    let cuts = (0..p).map(|j| if j < active.len() { cuts_shape.clone() } else { Vec::new() }).collect();
    let mut truth = GroundTruth {
        scenario: cfg.scenario,
        active,
        cuts,
        effect_sizes: cfg.effect_sizes.clone(),
        cut_regions: cfg.cut_regions.clone(),
        baseline_rate: cfg.baseline_rate,
        censoring_bound: None,
    };
    let lp = truth.linear_predictor(&features);
    let hazards: Vec<f64> = lp.iter().map(|f| cfg.baseline_rate * f.exp()).collect();
    let event_times: Vec<f64> = hazards.iter().map(|h| -open_unit(&mut rng).ln() / h).collect();
    let bound = calibrate_censoring(&hazards, cfg.censor_target);
    truth.censoring_bound = bound;
    let (mut times, mut events) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for &t in &event_times {
        let c = bound.map_or(f64::INFINITY, |b| b * open_unit(&mut rng));
        times.push(t.min(c));
        events.push(t <= c);
    }
    if !events.iter().any(|&e| e) {
        // vanishingly unlikely; force the earliest observation to be an event
        let i = (0..n).min_by(|&a, &b| times[a].total_cmp(&times[b])).unwrap_or(0);
        times[i] = event_times[i];
        events[i] = true;
    }
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    let data = SurvivalDataset::new(features, times, events, names)?;
    Ok(SimulatedDataset { data, truth, config: cfg.clone() })
}
