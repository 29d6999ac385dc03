//! Model-quality and cut-point accuracy metrics.

use serde::Serialize;

use crate::binarize::quantile_sorted;
use crate::cox::{BaselineHazard, RiskSets};
use crate::data::Outcome;
use crate::error::{Error, Result};
use crate::solver::CoxFit;

/// `2k - 2 log PL` of an unpenalized fit, `k` its number of coefficients.
pub fn aic(fit: &CoxFit) -> Result<f64> {
    if fit.lambda > 0.0 {
        return Err(Error::PenalizedFitRejected(fit.lambda));
    }
    let log_pl = -(fit.n_obs as f64) * fit.nll_value;
    Ok(2.0 * fit.beta.len() as f64 - 2.0 * log_pl)
}

/// The covariate-free Cox model as a fit.
pub fn null_fit(outcome: Outcome<'_>) -> Result<CoxFit> {
    let risk = RiskSets::new(outcome)?;
    let nll = risk.nll(&vec![0.0; outcome.len()]);
    Ok(CoxFit {
        beta: Vec::new(),
        lambda: 0.0,
        nll_value: nll,
        objective_value: nll,
        n_iterations: 0,
        converged: true,
        active_set: Vec::new(),
        n_obs: outcome.len(),
    })
}

/// Kaplan-Meier estimate of the censoring survival function `G(t) = P(C > t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoringKm {
    times: Vec<f64>,
    surv: Vec<f64>,
}

impl CensoringKm {
    /// Fits on `outcome` with censorings as the events; at tied times events leave the risk set
    /// after the censorings are counted.
    pub fn fit(outcome: Outcome<'_>) -> Self {
        let mut order: Vec<usize> = (0..outcome.len()).collect();
        order.sort_by(|&a, &b| outcome.times[a].total_cmp(&outcome.times[b]));
        let mut at_risk = outcome.len();
        let mut s = 1.0;
        let (mut times, mut surv) = (Vec::new(), Vec::new());
        let mut i = 0;
        while i < order.len() {
            let t = outcome.times[order[i]];
            let mut j = i;
            let mut censored = 0;
            while j < order.len() && outcome.times[order[j]] == t {
                censored += !outcome.events[order[j]] as usize;
                j += 1;
            }
            if censored > 0 {
                s *= 1.0 - censored as f64 / at_risk as f64;
                times.push(t);
                surv.push(s);
            }
            at_risk -= j - i;
            i = j;
        }
        Self { times, surv }
    }

    /// `G(t)`, right-continuous.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            1.0
        } else {
            self.surv[k - 1]
        }
    }

    /// `G(t-)`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            1.0
        } else {
            self.surv[k - 1]
        }
    }
}

/// 100 equally spaced times from the 5th to the 95th percentile of the event times.
pub fn default_time_grid(outcome: Outcome<'_>) -> Result<Vec<f64>> {
    let mut ev: Vec<f64> = (0..outcome.len()).filter(|&i| outcome.events[i]).map(|i| outcome.times[i]).collect();
    if ev.is_empty() {
        return Err(Error::NoEvents);
    }
    ev.sort_by(f64::total_cmp);
    let (lo, hi) = (quantile_sorted(&ev, 0.05), quantile_sorted(&ev, 0.95));
    if hi <= lo {
        return Ok(vec![lo]);
    }
    Ok((0..100).map(|k| lo + (hi - lo) * k as f64 / 99.0).collect())
}

/// IPCW Brier score at `t` for predicted survival `pred(i, t)` of the test subjects.
pub fn brier_score(pred: &dyn Fn(usize, f64) -> f64, test: Outcome<'_>, km: &CensoringKm, t: f64) -> f64 {
    let g_t = km.at(t);
    let mut total = 0.0;
    for i in 0..test.len() {
        let ti = test.times[i];
        let s = pred(i, t);
        if ti <= t && test.events[i] {
            total += s * s / km.left_limit(ti);
        } else if ti > t {
            total += (1.0 - s) * (1.0 - s) / g_t;
        }
    }
    total / test.len() as f64
}

/// Trapezoidal time average of the IPCW Brier score over `grid`.
///
/// Grid points where the censoring survival estimate has reached zero are dropped with a
/// warning; the call fails when nothing is left.
pub fn integrated_brier(
    pred: &dyn Fn(usize, f64) -> f64,
    test: Outcome<'_>,
    km: &CensoringKm,
    grid: &[f64],
) -> Result<f64> {
    if grid.is_empty() || grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("time grid must be nonempty, nonnegative and increasing".into()));
    }
    let usable: Vec<f64> = grid.iter().copied().filter(|&t| km.at(t) > 0.0).collect();
    if usable.len() < grid.len() {
        let first_bad = grid[usable.len()];
        if usable.is_empty() {
            return Err(Error::DegenerateCensoringKm(first_bad));
        }
        log::warn!("censoring distribution estimate reaches zero at t = {first_bad}; time grid truncated");
    }
    let bs: Vec<f64> = usable.iter().map(|&t| brier_score(pred, test, km, t)).collect();
    if usable.len() == 1 {
        return Ok(bs[0]);
    }
    let mut area = 0.0;
    for k in 1..usable.len() {
        area += 0.5 * (bs[k] + bs[k - 1]) * (usable[k] - usable[k - 1]);
    }
    Ok(area / (usable[usable.len() - 1] - usable[0]))
}

/// IBS of a Cox model given its baseline hazard and the test linear predictors, with censoring
/// weights estimated on `train`.
pub fn ibs(bh: &BaselineHazard, lp: &[f64], test: Outcome<'_>, train: Outcome<'_>, grid: &[f64]) -> Result<f64> {
    if lp.len() != test.len() {
        return Err(Error::DimensionMismatch { expected: test.len(), found: lp.len() });
    }
    let km = CensoringKm::fit(train);
    let risk: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
    let pred = |i: usize, t: f64| (-bh.at(t) * risk[i]).exp();
    integrated_brier(&pred, test, &km, grid)
}

/// Harrell's concordance index; pairs need a strictly earlier event time, score ties count half.
pub fn c_index(lp: &[f64], outcome: Outcome<'_>) -> Result<f64> {
    if lp.len() != outcome.len() {
        return Err(Error::DimensionMismatch { expected: outcome.len(), found: lp.len() });
    }
    let (mut usable, mut concordant) = (0u64, 0.0f64);
    for i in 0..lp.len() {
        if !outcome.events[i] {
            continue;
        }
        for j in 0..lp.len() {
            if outcome.times[i] < outcome.times[j] {
                usable += 1;
                if lp[i] > lp[j] {
                    concordant += 1.0;
                } else if lp[i] == lp[j] {
                    concordant += 0.5;
                }
            }
        }
    }
    if usable == 0 {
        return Err(Error::NoComparablePairs);
    }
    Ok(concordant / usable as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutMatch {
    pub truth: f64,
    pub estimate: Option<f64>,
    /// `estimate - truth`.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureAccuracy {
    pub name: String,
    pub matches: Vec<CutMatch>,
    pub missed: usize,
    pub spurious: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutpointAccuracy {
    pub features: Vec<FeatureAccuracy>,
    pub n_matched: usize,
    pub n_missed: usize,
    pub n_spurious: usize,
    /// Mean of `|estimate - truth|` over matched pairs; `None` without matches.
    pub mean_abs_bias: Option<f64>,
    pub matching_rule: &'static str,
}

impl CutpointAccuracy {
    pub fn feature(&self, name: &str) -> Option<&FeatureAccuracy> {
        self.features.iter().find(|f| f.name == name)
    }

    /// True when every true cut-point of every feature found a match.
    pub fn all_matched(&self) -> bool {
        self.n_missed == 0
    }
}

/// Greedy nearest matching: repeatedly pairs the globally closest unmatched truth and estimate;
/// distance ties go to the lower truth, then the lower estimate.
fn greedy_match(truth: &[f64], est: &[f64]) -> Vec<Option<usize>> {
    let mut out = vec![None; truth.len()];
    let mut used = vec![false; est.len()];
    for _ in 0..truth.len().min(est.len()) {
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, &t) in truth.iter().enumerate() {
            if out[i].is_some() {
                continue;
            }
            for (j, &e) in est.iter().enumerate() {
                if used[j] {
                    continue;
                }
                let d = (e - t).abs();
                let better = match best {
                    None => true,
                    Some((bd, _, _)) => d < bd - 1e-12,
                };
                if better {
                    best = Some((d, i, j));
                }
            }
        }
        if let Some((_, i, j)) = best {
            out[i] = Some(j);
            used[j] = true;
        }
    }
    out
}

/// Matches true cut-points to estimated ones feature by feature.
///
/// Both inputs are `(feature name, thresholds)`; features present on only one side are
/// counted entirely as missed or spurious.
pub fn cutpoint_accuracy(truth: &[(String, Vec<f64>)], estimates: &[(String, Vec<f64>)]) -> CutpointAccuracy {
    let mut names: Vec<&String> = truth.iter().map(|(n, _)| n).collect();
    for (n, _) in estimates {
        if !names.contains(&n) {
            names.push(n);
        }
    }
    let sorted = |v: Option<&Vec<f64>>| {
        let mut v = v.cloned().unwrap_or_default();
        v.sort_by(f64::total_cmp);
        v
    };
    let mut features = Vec::new();
    let (mut n_matched, mut n_missed, mut n_spurious, mut bias) = (0, 0, 0, 0.0);
    for name in names {
        let t = sorted(truth.iter().find(|(n, _)| n == name).map(|(_, v)| v));
        let e = sorted(estimates.iter().find(|(n, _)| n == name).map(|(_, v)| v));
        let assignment = greedy_match(&t, &e);
        let matches: Vec<CutMatch> = t
            .iter()
            .zip(&assignment)
            .map(|(&tv, a)| CutMatch { truth: tv, estimate: a.map(|j| e[j]), distance: a.map(|j| e[j] - tv) })
            .collect();
        let matched = assignment.iter().flatten().count();
        n_matched += matched;
        bias += matches.iter().filter_map(|m| m.distance).map(f64::abs).sum::<f64>();
        let missed = t.len() - matched;
        let spurious = e.len() - matched;
        n_missed += missed;
        n_spurious += spurious;
        features.push(FeatureAccuracy { name: name.clone(), matches, missed, spurious });
    }
    CutpointAccuracy {
        features,
        n_matched,
        n_missed,
        n_spurious,
        mean_abs_bias: (n_matched > 0).then(|| bias / n_matched as f64),
        matching_rule: "greedy nearest, globally closest pair first, ties to the lower true cut-point",
    }
}

/// Counts of true cut-points whose matched estimate lies within `max_steps` grid positions of
/// the candidate threshold nearest the truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridRecovery {
    pub recovered: usize,
    pub total: usize,
}

impl GridRecovery {
    pub fn all(&self) -> bool {
        self.recovered == self.total
    }
}

fn nearest_index(grid: &[f64], v: f64) -> usize {
    let k = grid.partition_point(|&g| g < v);
    if k == 0 {
        0
    } else if k == grid.len() || v - grid[k - 1] <= grid[k] - v {
        k - 1
    } else {
        k
    }
}

/// Grid-index recovery of matched cut-points; `grids` holds each feature's candidate thresholds.
pub fn grid_recovery(accuracy: &CutpointAccuracy, grids: &[(String, Vec<f64>)], max_steps: usize) -> GridRecovery {
    let mut out = GridRecovery { recovered: 0, total: 0 };
    for f in &accuracy.features {
        let grid = grids.iter().find(|(n, _)| *n == f.name).map(|(_, g)| g.as_slice()).unwrap_or(&[]);
        for m in &f.matches {
            out.total += 1;
            if let (Some(e), false) = (m.estimate, grid.is_empty()) {
                if nearest_index(grid, e).abs_diff(nearest_index(grid, m.truth)) <= max_steps {
                    out.recovered += 1;
                }
            }
        }
    }
    out
}

/// Quality summary of one categorized model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationBundle {
    pub aic: f64,
    pub ibs: f64,
    pub c_index: f64,
    pub n_cutpoints: usize,
    /// Timing is informational and excluded from deterministic outputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
}

impl EvaluationBundle {
    pub const CSV_HEADER: &'static str = "aic,ibs,c_index,n_cutpoints";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.aic, self.ibs, self.c_index, self.n_cutpoints)
    }

    /// Ratios of this bundle's metrics to a baseline's.
    pub fn relative_to(&self, baseline: &EvaluationBundle) -> RelativeMetrics {
        RelativeMetrics {
            aic: self.aic / baseline.aic,
            ibs: self.ibs / baseline.ibs,
            c_index: self.c_index / baseline.c_index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelativeMetrics {
    pub aic: f64,
    pub ibs: f64,
    pub c_index: f64,
}
