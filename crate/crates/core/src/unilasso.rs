//! miniLasso: univariate Cox fits per indicator, leave-one-out univariate predictors, and a
//! non-negative lasso over those predictors.
//!
//! For a 0/1 column the univariate partial likelihood depends only on per-event-group counts:
//! with `A_g`, `B_g` the numbers of at-risk subjects with indicator 0 and 1,
//!
//! ```text
//! log PL(b) = sum_g [ b * d1_g - d_g * log(A_g + e^b B_g) ]
//! ```
//!
//! so every fit and every case-deleted refit costs O(groups) per Newton iteration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binarize::CumulativeDesign;
use crate::cox::RiskSets;
use crate::data::Outcome;
use crate::design::{DesignMatrix, RealDesign};
use crate::error::{Error, Result};
use crate::solver::{Constraint, CoxLasso, CvConfig, CvResult, LambdaRule, PenaltyWeights};

const SCORE_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 50;

/// How leave-one-out slopes are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LooMethod {
    /// Full Newton refit on the case-deleted data, warm-started at the full-data slope.
    #[default]
    Exact,
    /// One Newton step from the full-data slope on the case-deleted score.
    OneStep,
}

impl std::str::FromStr for LooMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "one_step" | "one-step" => Ok(Self::OneStep),
            other => Err(Error::InvalidConfig(format!("unknown LOO method '{other}'"))),
        }
    }
}

/// Event-group counts of one indicator column.
struct Counts {
    a: Vec<f64>,
    b: Vec<f64>,
    d: Vec<f64>,
    d1: Vec<f64>,
}

/// Removal of one subject with indicator 1: it leaves the first `groups_at_risk` groups, and
/// its own event group loses one event when it had one.
#[derive(Clone, Copy)]
struct Deletion {
    groups_at_risk: usize,
    event_group: Option<usize>,
}

impl Counts {
    fn new(risk: &RiskSets, rows: &[u32]) -> Self {
        let n = risk.len();
        let mut mark = vec![false; n];
        for &r in rows {
            if let Some(p) = risk.position_of(r as usize) {
                mark[p] = true;
            }
        }
        let mut tail = vec![0usize; n + 1];
        for p in (0..n).rev() {
            tail[p] = tail[p + 1] + mark[p] as usize;
        }
        let groups = risk.groups();
        let mut c = Counts {
            a: Vec::with_capacity(groups.len()),
            b: Vec::with_capacity(groups.len()),
            d: Vec::with_capacity(groups.len()),
            d1: Vec::with_capacity(groups.len()),
        };
        for g in groups {
            let s = g.start as usize;
            let b = tail[s];
            c.b.push(b as f64);
            c.a.push((n - s - b) as f64);
            c.d.push(g.n_events as f64);
            let d1 = (s..g.end as usize).filter(|&p| mark[p] && risk.is_event_at(p)).count();
            c.d1.push(d1 as f64);
        }
        c
    }

    #[inline]
    fn group(&self, g: usize, del: Option<Deletion>) -> (f64, f64, f64, f64) {
        let (a, mut b, mut d, mut d1) = (self.a[g], self.b[g], self.d[g], self.d1[g]);
        if let Some(del) = del {
            if g < del.groups_at_risk {
                b -= 1.0;
            }
            if del.event_group == Some(g) {
                d -= 1.0;
                d1 -= 1.0;
            }
        }
        (a, b, d, d1)
    }

    /// Log-likelihood, score and information at `beta`.
    fn eval(&self, beta: f64, del: Option<Deletion>) -> (f64, f64, f64) {
        let (mut ll, mut u, mut info) = (0.0, 0.0, 0.0);
        let eb = beta.exp();
        for g in 0..self.a.len() {
            let (a, b, d, d1) = self.group(g, del);
            if d == 0.0 {
                continue;
            }
            let log_s0 = if beta > 0.0 { beta + (a / eb + b).ln() } else { (a + eb * b).ln() };
            let pi = if b == 0.0 { 0.0 } else { 1.0 / (1.0 + a / (eb * b)) };
            ll += beta * d1 - d * log_s0;
            u += d1 - d * pi;
            info += d * pi * (1.0 - pi);
        }
        (ll, u, info)
    }

    /// Whether the maximum-likelihood slope is finite: the score must be negative as
    /// `b -> +inf` and positive as `b -> -inf`.
    fn has_finite_mle(&self, del: Option<Deletion>) -> bool {
        let (mut d1_total, mut upper, mut lower) = (0.0, 0.0, 0.0);
        for g in 0..self.a.len() {
            let (a, b, d, d1) = self.group(g, del);
            d1_total += d1;
            if b > 0.0 {
                upper += d;
            }
            if a == 0.0 {
                lower += d;
            }
        }
        d1_total - upper < 0.0 && d1_total - lower > 0.0
    }

    /// Newton maximization with step halving; returns `(slope, converged, iterations)`.
    fn newton(&self, init: f64, del: Option<Deletion>) -> (f64, bool, usize) {
        let mut b = init;
        let (mut ll, mut u, mut info) = self.eval(b, del);
        for it in 0..MAX_NEWTON {
            if u.abs() < SCORE_TOL {
                return (b, true, it);
            }
            if !(info > 0.0) {
                return (b, false, it);
            }
            let mut step = u / info;
            let mut moved = false;
            for _ in 0..60 {
                let nb = b + step;
                let (nll, nu, ni) = self.eval(nb, del);
                if nll >= ll - 1e-12 * ll.abs().max(1.0) {
                    b = nb;
                    ll = nll;
                    u = nu;
                    info = ni;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                return (b, u.abs() < SCORE_TOL, it + 1);
            }
        }
        (b, u.abs() < SCORE_TOL, MAX_NEWTON)
    }
}

/// Univariate Cox fit of every indicator column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnivariateFits {
    /// Slope per column; 0 for degenerate columns.
    pub slopes: Vec<f64>,
    pub converged: Vec<bool>,
    /// Monotone likelihood (no finite maximum); excluded downstream.
    pub degenerate: Vec<bool>,
    pub iterations: Vec<usize>,
    /// Events with indicator 1 and with indicator 0, per column.
    pub event_split: Vec<(usize, usize)>,
}

impl UnivariateFits {
    pub fn len(&self) -> usize {
        self.slopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slopes.is_empty()
    }

    /// Columns usable downstream.
    pub fn usable(&self, k: usize) -> bool {
        !self.degenerate[k] && self.converged[k]
    }
}

/// Fits a one-covariate Cox model to every column of `design`.
/// slope, converged, degenerate, iterations, (events with x = 1, events with x = 0)
type ColumnFit = (f64, bool, bool, usize, (usize, usize));

pub fn univariate_fits(design: &CumulativeDesign, outcome: Outcome<'_>) -> Result<UnivariateFits> {
    if design.n_rows() != outcome.len() {
        return Err(Error::DimensionMismatch { expected: outcome.len(), found: design.n_rows() });
    }
    let risk = RiskSets::new(outcome)?;
    let total_events = outcome.n_events();
    let per: Vec<ColumnFit> = (0..design.n_cols())
        .into_par_iter()
        .map(|k| {
            let c = Counts::new(&risk, design.rows_of(k));
            let d1 = c.d1.iter().sum::<f64>() as usize;
            let split = (d1, total_events - d1);
            if !c.has_finite_mle(None) {
                return (0.0, false, true, 0, split);
            }
            let (b, conv, it) = c.newton(0.0, None);
            if conv && b.is_finite() {
                (b, true, false, it, split)
            } else {
                (0.0, false, false, it, split)
            }
        })
        .collect();
    Ok(UnivariateFits {
        slopes: per.iter().map(|p| p.0).collect(),
        converged: per.iter().map(|p| p.1).collect(),
        degenerate: per.iter().map(|p| p.2).collect(),
        iterations: per.iter().map(|p| p.3).collect(),
        event_split: per.iter().map(|p| p.4).collect(),
    })
}

/// Leave-one-out univariate linear predictors, entry `(i, k) = slope_k^{(-i)} * x_ik`.
#[derive(Debug, Clone, PartialEq)]
pub struct LooPredictorMatrix {
    pub method: LooMethod,
    /// Column-sparse values; zeros wherever the indicator is 0 or the column is unusable.
    pub values: RealDesign,
    /// Case-deleted refits that failed and fell back to the one-step value.
    pub fallbacks: usize,
}

impl LooPredictorMatrix {
    pub fn get(&self, i: usize, k: usize) -> f64 {
        let col = self.values.column(k);
        match col.rows().binary_search(&(i as u32)) {
            Ok(e) => col.value_at(e),
            Err(_) => 0.0,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.values.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.n_cols()
    }
}

/// Chebyshev nodes used to interpolate case-deleted scores around the full-data slope.
const CHEB_NODES: usize = 16;
/// Largest interpolation half-width; rows whose one-step slope moves further are refit directly.
const CHEB_MAX_RADIUS: f64 = 0.25;

/// Per-column prefix tables for case deletions of indicator-1 subjects.
struct DeletionTables {
    beta: f64,
    u_full: f64,
    i_full: f64,
    /// `pu[K]`, `pi[K]`: score and information change from the first K groups losing one subject.
    pu: Vec<f64>,
    pi: Vec<f64>,
    /// Probability of an indicator-1 event in group g after one indicator-1 subject leaves.
    pi_del: Vec<f64>,
    /// Events in groups whose only indicator-1 subject is the deleted one, cumulated.
    lone: Vec<f64>,
    d1_total: f64,
    upper: f64,
    lower: f64,
}

impl DeletionTables {
    fn new(c: &Counts, beta: f64) -> Self {
        let g = c.a.len();
        let eb = beta.exp();
        let (_, u_full, i_full) = c.eval(beta, None);
        let mut t = DeletionTables {
            beta,
            u_full,
            i_full,
            pu: vec![0.0; g + 1],
            pi: vec![0.0; g + 1],
            pi_del: vec![0.0; g],
            lone: vec![0.0; g + 1],
            d1_total: c.d1.iter().sum(),
            upper: 0.0,
            lower: 0.0,
        };
        for gi in 0..g {
            let (a, b, d) = (c.a[gi], c.b[gi], c.d[gi]);
            let p = prob(a, b, eb);
            let pd = prob(a, b - 1.0, eb);
            t.pi_del[gi] = pd;
            t.pu[gi + 1] = t.pu[gi] + d * (p - pd);
            t.pi[gi + 1] = t.pi[gi] + d * (pd * (1.0 - pd) - p * (1.0 - p));
            t.lone[gi + 1] = t.lone[gi] + if b == 1.0 { d } else { 0.0 };
            if b > 0.0 {
                t.upper += d;
            }
            if a == 0.0 {
                t.lower += d;
            }
        }
        t
    }

    /// Case-deleted score and information at the full-data slope.
    fn at_full(&self, del: Deletion) -> (f64, f64) {
        let k = del.groups_at_risk;
        let (mut u, mut info) = (self.u_full + self.pu[k], self.i_full + self.pi[k]);
        if let Some(eg) = del.event_group {
            let pd = self.pi_del[eg];
            u -= 1.0 - pd;
            info -= pd * (1.0 - pd);
        }
        (u, info)
    }

    fn one_step(&self, del: Deletion) -> f64 {
        let (u, info) = self.at_full(del);
        if info > 0.0 {
            self.beta + u / info
        } else {
            self.beta
        }
    }

    /// Finite-MLE condition of the case-deleted problem in O(1).
    fn finite_after(&self, c: &Counts, del: Deletion) -> bool {
        let k = del.groups_at_risk;
        let (mut d1, mut upper, mut lower) = (self.d1_total, self.upper - self.lone[k], self.lower);
        if let Some(eg) = del.event_group {
            d1 -= 1.0;
            if c.b[eg] - 1.0 > 0.0 {
                upper -= 1.0;
            }
            if c.a[eg] == 0.0 {
                lower -= 1.0;
            }
        }
        d1 - upper < 0.0 && d1 - lower > 0.0
    }
}

#[inline]
fn prob(a: f64, b: f64, eb: f64) -> f64 {
    if b <= 0.0 {
        0.0
    } else {
        1.0 / (1.0 + a / (eb * b))
    }
}

/// Case-deleted score functions of one column sampled at Chebyshev nodes on
/// `[center - radius, center + radius]`.
struct ChebTables {
    center: f64,
    radius: f64,
    /// `u[j][K]`: full score plus the first-K-groups deletion change at node j.
    u: Vec<Vec<f64>>,
    /// `pi_del[j][g]`.
    pi_del: Vec<Vec<f64>>,
    /// `cos(pi k (j + 1/2) / m)` scaled for the coefficient transform.
    transform: Vec<f64>,
}

impl ChebTables {
    fn new(c: &Counts, center: f64, radius: f64) -> Self {
        let g = c.a.len();
        let mut u = Vec::with_capacity(CHEB_NODES);
        let mut pi_del = Vec::with_capacity(CHEB_NODES);
        for j in 0..CHEB_NODES {
            let s = (std::f64::consts::PI * (j as f64 + 0.5) / CHEB_NODES as f64).cos();
            let eb = (center + radius * s).exp();
            let mut uj = vec![0.0; g + 1];
            let mut pd = vec![0.0; g];
            let mut full = 0.0;
            for gi in 0..g {
                let (a, b, d) = (c.a[gi], c.b[gi], c.d[gi]);
                let p = prob(a, b, eb);
                pd[gi] = prob(a, b - 1.0, eb);
                full += c.d1[gi] - d * p;
                uj[gi + 1] = uj[gi] + d * (p - pd[gi]);
            }
            for v in &mut uj {
                *v += full;
            }
            u.push(uj);
            pi_del.push(pd);
        }
        let m = CHEB_NODES as f64;
        let transform = (0..CHEB_NODES * CHEB_NODES)
            .map(|i| {
                let (k, j) = (i / CHEB_NODES, i % CHEB_NODES);
                let w = if k == 0 { 1.0 } else { 2.0 };
                w / m * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / m).cos()
            })
            .collect();
        ChebTables { center, radius, u, pi_del, transform }
    }

    /// Root of the interpolated case-deleted score, or `None` when it leaves the interval.
    fn solve(&self, del: Deletion) -> Option<f64> {
        let m = CHEB_NODES;
        let vals: Vec<f64> = (0..m)
            .map(|j| {
                let mut v = self.u[j][del.groups_at_risk];
                if let Some(eg) = del.event_group {
                    v -= 1.0 - self.pi_del[j][eg];
                }
                v
            })
            .collect();
        let coef: Vec<f64> =
            self.transform.chunks(m).map(|row| row.iter().zip(&vals).map(|(t, v)| t * v).sum()).collect();
        let eval = |x: f64| -> (f64, f64) {
            // T_k and T_k' by recurrence
            let (mut t0, mut t1) = (1.0, x);
            let (mut d0, mut d1) = (0.0, 1.0);
            let mut f = coef[0] + coef[1] * x;
            let mut df = coef[1];
            for &ck in &coef[2..] {
                let t2 = 2.0 * x * t1 - t0;
                let d2 = 2.0 * t1 + 2.0 * x * d1 - d0;
                f += ck * t2;
                df += ck * d2;
                (t0, t1, d0, d1) = (t1, t2, d1, d2);
            }
            (f, df)
        };
        // score decreases in beta; bracket then safeguarded Newton
        let (mut lo, mut hi) = (-1.0, 1.0);
        if !(eval(lo).0 > 0.0 && eval(hi).0 < 0.0) {
            return None;
        }
        let mut x = 0.0;
        for _ in 0..100 {
            let (f, df) = eval(x);
            if f == 0.0 {
                break;
            }
            if f > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let mut nx = if df < 0.0 { x - f / df } else { f64::NAN };
            if !(nx > lo && nx < hi) {
                nx = 0.5 * (lo + hi);
            }
            if (nx - x).abs() < 1e-15 {
                x = nx;
                break;
            }
            x = nx;
        }
        Some(self.center + self.radius * x)
    }
}

/// Leave-one-out predictors for every usable column of `design`.
pub fn loo_predictors(
    design: &CumulativeDesign,
    outcome: Outcome<'_>,
    fits: &UnivariateFits,
    method: LooMethod,
) -> Result<LooPredictorMatrix> {
    if fits.len() != design.n_cols() {
        return Err(Error::DimensionMismatch { expected: design.n_cols(), found: fits.len() });
    }
    let n = design.n_rows();
    let risk = RiskSets::new(outcome)?;
    let cols: Vec<(Vec<f64>, usize)> = (0..design.n_cols())
        .into_par_iter()
        .map(|k| {
            let mut col = vec![0.0; n];
            if !fits.usable(k) {
                return (col, 0);
            }
            let c = Counts::new(&risk, design.rows_of(k));
            let beta = fits.slopes[k];
            let tables = DeletionTables::new(&c, beta);
            let rows = design.rows_of(k);
            let dels: Vec<Deletion> = rows
                .iter()
                .map(|&r| {
                    let p = risk.position_of(r as usize).expect("full risk sets contain every row");
                    let groups_at_risk = risk.groups_through(p);
                    let event_group = if risk.is_event_at(p) { Some(groups_at_risk - 1) } else { None };
                    Deletion { groups_at_risk, event_group }
                })
                .collect();
            let steps: Vec<f64> = dels.iter().map(|&d| tables.one_step(d)).collect();
            let mut fallbacks = 0;
            if method == LooMethod::OneStep {
                for (&r, &s) in rows.iter().zip(&steps) {
                    col[r as usize] = if s.is_finite() { s } else { beta };
                }
                return (col, 0);
            }
            let spread = steps
                .iter()
                .filter(|s| s.is_finite())
                .map(|s| (s - beta).abs())
                .filter(|&d| d <= CHEB_MAX_RADIUS)
                .fold(0.0f64, f64::max);
            let radius = (2.0 * spread + 1e-6).min(CHEB_MAX_RADIUS);
            let cheb = ChebTables::new(&c, beta, radius);
            for ((&r, &del), &step) in rows.iter().zip(&dels).zip(&steps) {
                if !tables.finite_after(&c, del) {
                    fallbacks += 1;
                    col[r as usize] = if step.is_finite() { step } else { beta };
                    continue;
                }
                let near = (step - beta).abs() <= CHEB_MAX_RADIUS;
                let value = near.then(|| cheb.solve(del)).flatten().or_else(|| {
                    let (b, conv, _) = c.newton(if step.is_finite() { step } else { beta }, Some(del));
                    (conv && b.is_finite()).then_some(b)
                });
                col[r as usize] = value.unwrap_or_else(|| {
                    fallbacks += 1;
                    if step.is_finite() {
                        step
                    } else {
                        beta
                    }
                });
            }
            (col, fallbacks)
        })
        .collect();
    let fallbacks = cols.iter().map(|c| c.1).sum();
    let dense: Vec<Vec<f64>> = cols.into_iter().map(|c| c.0).collect();
    Ok(LooPredictorMatrix { method, values: RealDesign::from_columns(n, &dense), fallbacks })
}

/// Fitted miniLasso model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiniLassoFit {
    /// Non-negative second-stage coefficients.
    pub theta: Vec<f64>,
    /// `theta_k * slope_k`, the per-indicator log-hazard effect.
    pub composite_effects: Vec<f64>,
    pub lambda: f64,
    pub rule: LambdaRule,
    pub univariate: UnivariateFits,
    pub loo_method: LooMethod,
    pub loo_fallbacks: usize,
    pub cv: CvResult,
}

impl MiniLassoFit {
    /// Columns with a nonzero composite effect.
    pub fn selected(&self) -> Vec<usize> {
        (0..self.composite_effects.len()).filter(|&k| self.composite_effects[k] != 0.0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiniLassoConfig {
    pub cv: CvConfig,
    pub loo: LooMethod,
}

impl Default for MiniLassoConfig {
    fn default() -> Self {
        Self { cv: CvConfig::default(), loo: LooMethod::Exact }
    }
}

/// Runs all three miniLasso steps on a cumulative design.
///
/// `weights` defaults to 1 on every column, with zeros on the design's penalty-exempt columns.
pub fn fit_minilasso(
    design: &CumulativeDesign,
    outcome: Outcome<'_>,
    weights: Option<PenaltyWeights>,
    config: &MiniLassoConfig,
) -> Result<MiniLassoFit> {
    let fits = univariate_fits(design, outcome)?;
    let loo = loo_predictors(design, outcome, &fits, config.loo)?;
    let weights = match weights {
        Some(w) => w,
        None => PenaltyWeights::with_exempt(design.n_cols(), design.penalty_exempt())?,
    };
    let problem = CoxLasso::new(&loo.values, outcome)?.weights(weights)?.constraint(Constraint::NonNegative);
    let cv = problem.cross_validate(&config.cv)?;
    let fit = cv.selected_fit(config.cv.rule);
    let theta = fit.beta.clone();
    debug_assert!(theta.iter().all(|&t| t >= 0.0));
    let composite_effects: Vec<f64> = theta.iter().zip(&fits.slopes).map(|(t, s)| t * s).collect();
    Ok(MiniLassoFit {
        theta,
        composite_effects,
        lambda: fit.lambda,
        rule: config.cv.rule,
        univariate: fits,
        loo_method: config.loo,
        loo_fallbacks: loo.fallbacks,
        cv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binarize::{cumulative_binarize, CutGrid};
    use crate::cox::fit_univariate;
    use crate::data::SurvivalDataset;
    use ndarray::Array2;

    fn small() -> SurvivalDataset {
        let x = vec![0.1, 0.9, 0.4, 0.8, 0.3, 0.7, 0.2, 0.6, 0.95, 0.05, 0.5, 0.45];
        let t = vec![5.0, 1.0, 4.0, 2.5, 6.0, 2.0, 3.0, 7.0, 1.5, 8.0, 3.5, 4.5];
        let e = vec![true, true, false, true, true, true, false, true, true, true, true, false];
        SurvivalDataset::new(Array2::from_shape_vec((12, 1), x).unwrap(), t, e, vec!["x".into()]).unwrap()
    }

    #[test]
    fn counts_newton_matches_dense_newton() {
        let ds = small();
        let grid = CutGrid::explicit(&ds, vec![(0, vec![0.35, 0.65])]).unwrap();
        let x = cumulative_binarize(&ds, &grid).unwrap();
        let fits = univariate_fits(&x, ds.outcome()).unwrap();
        let risk = RiskSets::new(ds.outcome()).unwrap();
        for k in 0..2 {
            let dense = x.column(k).to_dense(12);
            let u = fit_univariate(&risk, &dense, 0.0, 100, 1e-12);
            assert!((u.beta - fits.slopes[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn exact_loo_matches_refit_from_scratch() {
        let ds = small();
        let grid = CutGrid::explicit(&ds, vec![(0, vec![0.35, 0.65])]).unwrap();
        let x = cumulative_binarize(&ds, &grid).unwrap();
        let fits = univariate_fits(&x, ds.outcome()).unwrap();
        let loo = loo_predictors(&x, ds.outcome(), &fits, LooMethod::Exact).unwrap();
        for i in 0..12 {
            let rows: Vec<usize> = (0..12).filter(|&r| r != i).collect();
            let risk = RiskSets::subset(ds.outcome(), &rows).unwrap();
            for k in 0..2 {
                let dense = x.column(k).to_dense(12);
                if dense[i] == 0.0 {
                    assert_eq!(loo.get(i, k), 0.0);
                    continue;
                }
                let u = fit_univariate(&risk, &dense, 0.0, 200, 1e-13);
                if !u.degenerate {
                    assert!((loo.get(i, k) - u.beta).abs() < 1e-8, "{i} {k}");
                }
            }
        }
    }

    #[test]
    fn interpolated_refits_match_direct_newton() {
        use crate::simgen::{simulate, ScenarioConfig};
        let sim = simulate(&ScenarioConfig::for_scenario(1, 300, 4)).unwrap();
        let ds = &sim.data;
        let grid = crate::binarize::build_cut_grid(ds, 10, crate::binarize::GridStrategy::Quantile).unwrap();
        let x = cumulative_binarize(ds, &grid).unwrap();
        let fits = univariate_fits(&x, ds.outcome()).unwrap();
        let loo = loo_predictors(&x, ds.outcome(), &fits, LooMethod::Exact).unwrap();
        let risk = RiskSets::new(ds.outcome()).unwrap();
        for k in 0..x.n_cols() {
            let c = Counts::new(&risk, x.rows_of(k));
            for &r in x.rows_of(k) {
                let p = risk.position_of(r as usize).unwrap();
                let g = risk.groups_through(p);
                let del = Deletion { groups_at_risk: g, event_group: risk.is_event_at(p).then_some(g - 1) };
                let (b, conv, _) = c.newton(fits.slopes[k], Some(del));
                assert!(conv);
                assert!((loo.get(r as usize, k) - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_column_is_degenerate() {
        let ds = small();
        let grid = CutGrid::explicit(&ds, vec![(0, vec![0.99])]).unwrap();
        let x = cumulative_binarize(&ds, &grid).unwrap();
        let fits = univariate_fits(&x, ds.outcome()).unwrap();
        assert!(fits.degenerate[0]);
        assert_eq!(fits.slopes[0], 0.0);
    }
}
