//! Breslow partial likelihood of the Cox model, its derivatives, baseline hazard and
//! survival prediction.
//!
//! The objective is the scaled negative log-partial likelihood
//!
//! ```text
//! nll(f) = -(1/n) sum_{i: event} [ f_i - log sum_{i': t_i' >= t_i} exp(f_i') ]
//! ```
//!
//! Tied event times share one risk set. Every risk-set sum comes from one reverse
//! cumulative pass over subjects sorted by time, with linear predictors centred before
//! exponentiation.

use serde::{Deserialize, Serialize};

use crate::data::Outcome;
use crate::design::DesignMatrix;
use crate::error::{Error, Result};

const ABSENT: u32 = u32::MAX;

/// Distinct event time with its risk-set start in sorted order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventGroup {
    pub time: f64,
    /// First sorted position whose time is `>= time`; the risk set is `start..n`.
    pub start: u32,
    /// One past the last sorted position with exactly this time.
    pub end: u32,
    pub n_events: u32,
}

/// Time ordering, risk sets and tie groups of a (subset of an) outcome.
#[derive(Debug, Clone)]
pub struct RiskSets {
    order: Vec<u32>,
    position: Vec<u32>,
    is_event: Vec<bool>,
    times: Vec<f64>,
    groups: Vec<EventGroup>,
    /// Number of event groups with time <= time at each sorted position.
    groups_through: Vec<u32>,
}

impl RiskSets {
    pub fn new(outcome: Outcome<'_>) -> Result<Self> {
        let rows: Vec<usize> = (0..outcome.len()).collect();
        Self::subset(outcome, &rows)
    }

    /// Risk sets over `rows` only; other rows are ignored entirely.
    pub fn subset(outcome: Outcome<'_>, rows: &[usize]) -> Result<Self> {
        let mut order: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
        order.sort_by(|&a, &b| {
            outcome.times[a as usize]
                .total_cmp(&outcome.times[b as usize])
                .then(a.cmp(&b))
        });
        let mut position = vec![ABSENT; outcome.len()];
        for (p, &r) in order.iter().enumerate() {
            position[r as usize] = p as u32;
        }
        let times: Vec<f64> = order.iter().map(|&r| outcome.times[r as usize]).collect();
        let is_event: Vec<bool> = order.iter().map(|&r| outcome.events[r as usize]).collect();

        let n = order.len();
        let mut groups = Vec::new();
        let mut groups_through = vec![0u32; n];
        let mut p = 0;
        while p < n {
            let mut end = p + 1;
            while end < n && times[end] == times[p] {
                end += 1;
            }
            let d = is_event[p..end].iter().filter(|&&e| e).count() as u32;
            if d > 0 {
                groups.push(EventGroup { time: times[p], start: p as u32, end: end as u32, n_events: d });
            }
            for g in &mut groups_through[p..end] {
                *g = groups.len() as u32;
            }
            p = end;
        }
        if groups.is_empty() {
            return Err(Error::NoEvents);
        }
        Ok(Self { order, position, is_event, times, groups, groups_through })
    }

    /// Number of subjects in the risk-set structure.
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn groups(&self) -> &[EventGroup] {
        &self.groups
    }

    /// Original row at sorted position `p`.
    #[inline]
    pub fn row_at(&self, p: usize) -> usize {
        self.order[p] as usize
    }

    /// Sorted position of original row `r`, if it belongs to the subset.
    #[inline]
    pub fn position_of(&self, r: usize) -> Option<usize> {
        match self.position.get(r) {
            Some(&p) if p != ABSENT => Some(p as usize),
            _ => None,
        }
    }

    #[inline]
    pub fn is_event_at(&self, p: usize) -> bool {
        self.is_event[p]
    }

    #[inline]
    pub fn time_at(&self, p: usize) -> f64 {
        self.times[p]
    }

    #[inline]
    pub fn groups_through(&self, p: usize) -> usize {
        self.groups_through[p] as usize
    }

    /// Original row indices in time order.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    /// Scaled negative log-partial likelihood for linear predictors indexed by original row.
    pub fn nll(&self, lp: &[f64]) -> f64 {
        let (w, shift) = self.sorted_weights(lp);
        let s0 = reverse_cumsum(&w);
        let mut total = 0.0;
        for g in &self.groups {
            let mut ev = 0.0;
            for p in g.start as usize..g.end as usize {
                if self.is_event[p] {
                    ev += lp[self.order[p] as usize] - shift;
                }
            }
            total += ev - g.n_events as f64 * s0[g.start as usize].ln();
        }
        -total / self.len() as f64
    }

    /// `exp(lp - shift)` in sorted order, shift = max lp over the subset.
    pub(crate) fn sorted_weights(&self, lp: &[f64]) -> (Vec<f64>, f64) {
        let shift = self
            .order
            .iter()
            .map(|&r| lp[r as usize])
            .fold(f64::NEG_INFINITY, f64::max);
        let w = self.order.iter().map(|&r| (lp[r as usize] - shift).exp()).collect();
        (w, shift)
    }

    /// Per-subject residuals `event - w_i * H(t_i)` in sorted order, where `H` is the
    /// Breslow cumulative hazard for the given weights.
    pub(crate) fn residuals(&self, w: &[f64], s0_groups: &[f64], out: &mut [f64], hazard: &mut [f64]) {
        // cumulative hazard indexed by number of groups passed
        hazard[0] = 0.0;
        let mut acc = 0.0;
        for (gi, (g, s0)) in self.groups.iter().zip(s0_groups).enumerate() {
            acc += g.n_events as f64 / s0;
            hazard[gi + 1] = acc;
        }
        for p in 0..self.len() {
            let h = hazard[self.groups_through[p] as usize];
            out[p] = (self.is_event[p] as u8 as f64) - w[p] * h;
        }
    }
}

pub(crate) fn reverse_cumsum(w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    let mut acc = 0.0;
    for p in (0..w.len()).rev() {
        acc += w[p];
        out[p] = acc;
    }
    out
}

fn check_dims(design: &dyn DesignMatrix, beta: &[f64], outcome: Outcome<'_>) -> Result<()> {
    if design.n_cols() != beta.len() {
        return Err(Error::DimensionMismatch { expected: design.n_cols(), found: beta.len() });
    }
    if design.n_rows() != outcome.len() {
        return Err(Error::DimensionMismatch { expected: design.n_rows(), found: outcome.len() });
    }
    Ok(())
}

/// Scaled negative log-partial likelihood at `beta`.
pub fn nll(design: &dyn DesignMatrix, beta: &[f64], outcome: Outcome<'_>) -> Result<f64> {
    check_dims(design, beta, outcome)?;
    let risk = RiskSets::new(outcome)?;
    Ok(risk.nll(&design.linear_predictor(beta)))
}

/// Gradient of [`nll`] with respect to `beta`.
pub fn nll_gradient(design: &dyn DesignMatrix, beta: &[f64], outcome: Outcome<'_>) -> Result<Vec<f64>> {
    check_dims(design, beta, outcome)?;
    let risk = RiskSets::new(outcome)?;
    Ok(gradient_with(&risk, design, &design.linear_predictor(beta)))
}

pub(crate) fn gradient_with(risk: &RiskSets, design: &dyn DesignMatrix, lp: &[f64]) -> Vec<f64> {
    let (w, _) = risk.sorted_weights(lp);
    let s0 = reverse_cumsum(&w);
    let s0_groups: Vec<f64> = risk.groups.iter().map(|g| s0[g.start as usize]).collect();
    let mut resid = vec![0.0; risk.len()];
    let mut hazard = vec![0.0; risk.groups.len() + 1];
    risk.residuals(&w, &s0_groups, &mut resid, &mut hazard);
    let n = risk.len() as f64;
    (0..design.n_cols())
        .map(|k| {
            let col = design.column(k);
            let mut acc = 0.0;
            for (e, &r) in col.rows().iter().enumerate() {
                if let Some(p) = risk.position_of(r as usize) {
                    acc += col.value_at(e) * resid[p];
                }
            }
            -acc / n
        })
        .collect()
}

/// Exact diagonal of the Hessian of [`nll`] at `beta`; every entry is nonnegative.
pub fn nll_curvature(design: &dyn DesignMatrix, beta: &[f64], outcome: Outcome<'_>) -> Result<Vec<f64>> {
    check_dims(design, beta, outcome)?;
    let risk = RiskSets::new(outcome)?;
    let (w, _) = risk.sorted_weights(&design.linear_predictor(beta));
    let s0 = reverse_cumsum(&w);
    let n = risk.len() as f64;
    let mut xs = vec![0.0; risk.len()];
    Ok((0..design.n_cols())
        .map(|k| {
            xs.iter_mut().for_each(|v| *v = 0.0);
            let col = design.column(k);
            for (e, &r) in col.rows().iter().enumerate() {
                xs[risk.position[r as usize] as usize] = col.value_at(e);
            }
            let (mut s1, mut s2) = (0.0, 0.0);
            let mut next = risk.len();
            let mut acc = 0.0;
            for g in risk.groups.iter().rev() {
                while next > g.start as usize {
                    next -= 1;
                    s1 += xs[next] * w[next];
                    s2 += xs[next] * xs[next] * w[next];
                }
                let s = s0[g.start as usize];
                let m1 = s1 / s;
                acc += g.n_events as f64 * (s2 / s - m1 * m1).max(0.0);
            }
            acc / n
        })
        .collect())
}

/// Breslow estimate of the cumulative baseline hazard at distinct event times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineHazard {
    pub times: Vec<f64>,
    pub cumulative_hazard: Vec<f64>,
}

impl BaselineHazard {
    /// `Lambda_0(t)`, right-continuous step function.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.cumulative_hazard[k - 1]
        }
    }

    /// Increments `d_k / sum_{R(t_k)} exp(f)`.
    pub fn increments(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cumulative_hazard
            .iter()
            .map(|&h| {
                let d = h - prev;
                prev = h;
                d
            })
            .collect()
    }
}

pub fn breslow_baseline(design: &dyn DesignMatrix, beta: &[f64], outcome: Outcome<'_>) -> Result<BaselineHazard> {
    check_dims(design, beta, outcome)?;
    let risk = RiskSets::new(outcome)?;
    Ok(breslow_from_lp(&risk, &design.linear_predictor(beta)))
}

pub fn breslow_from_lp(risk: &RiskSets, lp: &[f64]) -> BaselineHazard {
    let (w, shift) = risk.sorted_weights(lp);
    let s0 = reverse_cumsum(&w);
    let scale = (-shift).exp();
    let mut acc = 0.0;
    let mut times = Vec::with_capacity(risk.groups.len());
    let mut cumulative_hazard = Vec::with_capacity(risk.groups.len());
    for g in &risk.groups {
        acc += g.n_events as f64 / s0[g.start as usize] * scale;
        times.push(g.time);
        cumulative_hazard.push(acc);
    }
    BaselineHazard { times, cumulative_hazard }
}

/// `S(t | lp) = exp(-Lambda_0(t) exp(lp))` at each evaluation time.
pub fn predict_survival(bh: &BaselineHazard, lp: f64, eval_times: &[f64]) -> Vec<f64> {
    let r = lp.exp();
    eval_times.iter().map(|&t| (-bh.at(t) * r).exp()).collect()
}

/// Result of a one-covariate unpenalized Cox fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnivariateCox {
    pub beta: f64,
    /// Log-partial likelihood (unscaled) at `beta`.
    pub log_pl: f64,
    pub converged: bool,
    /// Likelihood is monotone (infinite estimate) or flat.
    pub degenerate: bool,
    pub iterations: usize,
}

/// One-dimensional Newton maximization of the Breslow partial likelihood for a dense
/// covariate `x` (indexed by original row).
pub fn fit_univariate(risk: &RiskSets, x: &[f64], init: f64, max_iter: usize, score_tol: f64) -> UnivariateCox {
    let n = risk.len();
    let xs: Vec<f64> = (0..n).map(|p| x[risk.row_at(p)]).collect();

    // limits of the score as beta -> +inf / -inf
    let (mut lim_hi, mut lim_lo) = (0.0, 0.0);
    let mut suffix_max = vec![f64::NEG_INFINITY; n + 1];
    let mut suffix_min = vec![f64::INFINITY; n + 1];
    for p in (0..n).rev() {
        suffix_max[p] = suffix_max[p + 1].max(xs[p]);
        suffix_min[p] = suffix_min[p + 1].min(xs[p]);
    }
    let mut scale = 0.0f64;
    for g in &risk.groups {
        let ev: f64 = (g.start..g.end).filter(|&p| risk.is_event[p as usize]).map(|p| xs[p as usize]).sum();
        let d = g.n_events as f64;
        lim_hi += ev - d * suffix_max[g.start as usize];
        lim_lo += ev - d * suffix_min[g.start as usize];
        scale = scale.max(suffix_max[g.start as usize].abs()).max(suffix_min[g.start as usize].abs());
    }
    let eps = 1e-12 * scale.max(1.0) * risk.groups.len() as f64;
    if !(lim_hi < -eps && lim_lo > eps) {
        return UnivariateCox { beta: 0.0, log_pl: f64::NAN, converged: false, degenerate: true, iterations: 0 };
    }

    let eval = |beta: f64| -> (f64, f64, f64) {
        let shift = if beta >= 0.0 { beta * suffix_max[0] } else { beta * suffix_min[0] };
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        let (mut ll, mut score, mut info) = (0.0, 0.0, 0.0);
        let mut next = n;
        for g in risk.groups.iter().rev() {
            while next > g.start as usize {
                next -= 1;
                let w = (beta * xs[next] - shift).exp();
                s0 += w;
                s1 += w * xs[next];
                s2 += w * xs[next] * xs[next];
            }
            let ev: f64 = (g.start..g.end).filter(|&p| risk.is_event[p as usize]).map(|p| xs[p as usize]).sum();
            let d = g.n_events as f64;
            let m1 = s1 / s0;
            ll += beta * ev - d * (s0.ln() + shift);
            score += ev - d * m1;
            info += d * (s2 / s0 - m1 * m1).max(0.0);
        }
        (ll, score, info)
    };

    let mut beta = init;
    let (mut ll, mut score, mut info) = eval(beta);
    for it in 0..max_iter {
        if score.abs() < score_tol {
            return UnivariateCox { beta, log_pl: ll, converged: true, degenerate: false, iterations: it };
        }
        if info <= 0.0 {
            break;
        }
        let mut step = score / info;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = beta + step;
            let (ll_c, sc_c, in_c) = eval(cand);
            if ll_c >= ll - 1e-12 * ll.abs() {
                beta = cand;
                ll = ll_c;
                score = sc_c;
                info = in_c;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    UnivariateCox { beta, log_pl: ll, converged: score.abs() < score_tol, degenerate: false, iterations: max_iter }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::RealDesign;

    fn outcome<'a>(t: &'a [f64], e: &'a [bool]) -> Outcome<'a> {
        Outcome::new(t, e).unwrap()
    }

    #[test]
    fn nll_three_events_zero_predictor() {
        let t = [1.0, 2.0, 3.0];
        let e = [true, true, true];
        let risk = RiskSets::new(outcome(&t, &e)).unwrap();
        let want = (3f64.ln() + 2f64.ln()) / 3.0;
        assert!((risk.nll(&[0.0; 3]) - want).abs() < 1e-14);
        assert!((want - 0.59725).abs() < 1e-5);
        // translation invariance
        assert!((risk.nll(&[5.0; 3]) - want).abs() < 1e-12);
    }

    #[test]
    fn two_subject_closed_forms() {
        let t = [1.0, 2.0];
        let e = [true, true];
        let d = RealDesign::from_columns(2, &[vec![1.0, 0.0]]);
        for b in [0.0f64, 0.7, -1.3] {
            let want = -0.5 * (b - (b.exp() + 1.0f64).ln());
            let got = nll(&d, &[b], outcome(&t, &e)).unwrap();
            assert!((got - want).abs() < 1e-14);
            let g = nll_gradient(&d, &[b], outcome(&t, &e)).unwrap()[0];
            let want_g = -0.5 * (1.0 - b.exp() / (b.exp() + 1.0));
            assert!((g - want_g).abs() < 1e-14);
            let h = nll_curvature(&d, &[b], outcome(&t, &e)).unwrap()[0];
            assert!((h - 0.5 * b.exp() / (1.0 + b.exp()).powi(2)).abs() < 1e-14);
        }
        let h0 = nll_curvature(&d, &[0.0], outcome(&t, &e)).unwrap()[0];
        assert!((h0 - 0.125).abs() < 1e-15);
        assert!((nll(&d, &[0.0], outcome(&t, &e)).unwrap() - 0.5 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_column_has_zero_derivatives() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let e = [true, false, true, true];
        let d = RealDesign::from_columns(4, &[vec![0.0; 4], vec![1.0, 0.0, 1.0, 0.0]]);
        let g = nll_gradient(&d, &[0.0, 0.4], outcome(&t, &e)).unwrap();
        let h = nll_curvature(&d, &[0.0, 0.4], outcome(&t, &e)).unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(h[0], 0.0);
    }

    #[test]
    fn ties_share_risk_set() {
        // events at t=1 tied: both have risk set {all 3}
        let t = [1.0, 1.0, 2.0];
        let e = [true, true, true];
        let risk = RiskSets::new(outcome(&t, &e)).unwrap();
        let want = (2.0 * 3f64.ln()) / 3.0;
        assert!((risk.nll(&[0.0; 3]) - want).abs() < 1e-14);
        assert_eq!(risk.groups().len(), 2);
    }

    #[test]
    fn breslow_worked_examples() {
        let t = [1.0, 2.0];
        let e = [true, true];
        let b = 0.8f64;
        let d = RealDesign::from_columns(2, &[vec![1.0, 0.0]]);
        let bh = breslow_baseline(&d, &[b], outcome(&t, &e)).unwrap();
        let inc = bh.increments();
        assert!((inc[0] - 1.0 / (b.exp() + 1.0)).abs() < 1e-14);
        assert!((inc[1] - 1.0).abs() < 1e-14);

        // beta = 0, no ties: Nelson-Aalen
        let t = [3.0, 1.0, 2.0, 4.0];
        let e = [true, true, false, true];
        let z = RealDesign::from_columns(4, &[vec![0.2, 0.1, 0.5, 0.3]]);
        let bh = breslow_baseline(&z, &[0.0], outcome(&t, &e)).unwrap();
        assert_eq!(bh.times, vec![1.0, 3.0, 4.0]);
        let inc = bh.increments();
        for (a, b) in inc.iter().zip([1.0 / 4.0, 1.0 / 2.0, 1.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn survival_prediction_shape() {
        let bh = BaselineHazard { times: vec![1.0, 2.0], cumulative_hazard: vec![0.5, 1.5] };
        assert_eq!(predict_survival(&bh, 0.3, &[0.5]), vec![1.0]);
        let s = predict_survival(&bh, 0.0, &[1.0, 1.5, 2.0, 9.0]);
        assert!((s[0] - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(s[0], s[1]);
        assert!((s[2] - (-1.5f64).exp()).abs() < 1e-15);
        let hi = predict_survival(&bh, 1.0, &[1.0, 2.0]);
        assert!(hi[0] < s[0] && hi[1] < s[2]);
    }

    #[test]
    fn univariate_newton_and_separation() {
        let t = [1.0, 2.0, 3.0, 4.0, 5.0];
        let e = [true, true, false, true, true];
        let risk = RiskSets::new(outcome(&t, &e)).unwrap();
        let x = [1.0, 0.0, 1.0, 1.0, 0.0];
        let fit = fit_univariate(&risk, &x, 0.0, 50, 1e-10);
        assert!(fit.converged && !fit.degenerate);
        let d = RealDesign::from_columns(5, &[x.to_vec()]);
        let g = nll_gradient(&d, &[fit.beta], outcome(&t, &e)).unwrap()[0];
        assert!(g.abs() < 1e-10);

        // every event subject has the largest x in its risk set: monotone likelihood
        let x = [3.0, 2.0, 0.0, 1.0, 0.5];
        let fit = fit_univariate(&risk, &x, 0.0, 50, 1e-10);
        assert!(fit.degenerate);
    }
}
