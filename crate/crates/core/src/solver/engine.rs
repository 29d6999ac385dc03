//! Cyclic coordinate descent for the weighted L1-penalized Breslow partial likelihood.
//!
//! State is kept in time-sorted order. Each coordinate update evaluates the exact score and
//! diagonal curvature of its column from one descending scan over the column entries and the
//! event groups, then takes a soft-thresholded Newton step on the local quadratic model.
//! Risk-set sums per event group are updated incrementally after every step and recomputed
//! exactly at the start of every full cycle.

use nalgebra::DMatrix;

use crate::cox::RiskSets;
use crate::data::Outcome;
use crate::design::DesignMatrix;
use crate::error::Result;

use super::{Constraint, SolverOptions};

/// Steps longer than this (in linear-predictor units) are checked for objective decrease.
const SAFEGUARD_STEP: f64 = 0.25;

/// Active blocks up to this size are solved with proximal Newton steps.
const NEWTON_MAX_ACTIVE: usize = 1000;


struct SortedColumn {
    /// Sorted positions holding nonzero entries, descending.
    pos: Vec<u32>,
    /// Entry values aligned with `pos`; `None` for 0/1 columns.
    vals: Option<Vec<f64>>,
    event_sum: f64,
    max_abs: f64,
}

impl SortedColumn {
    #[inline]
    fn value(&self, e: usize) -> f64 {
        match &self.vals {
            None => 1.0,
            Some(v) => v[e],
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CycleStats {
    pub max_delta: f64,
    pub max_violation: f64,
}

pub(crate) struct SolveOutcome {
    pub converged: bool,
    pub cycles: usize,
}

pub(crate) struct Engine {
    risk: RiskSets,
    n: f64,
    cols: Vec<SortedColumn>,
    /// Sorted positions of events.
    event_pos: Vec<u32>,
    eta: Vec<f64>,
    w: Vec<f64>,
    shift: f64,
    s0g: Vec<f64>,
    s1g: Vec<f64>,
    resid: Vec<f64>,
    hazard: Vec<f64>,
    pub beta: Vec<f64>,
    weights: Vec<f64>,
    max_weight: f64,
    constraint: Constraint,
    options: SolverOptions,
    /// `sqrt(d_g / n)` per event group.
    sqrt_event_weight: Vec<f64>,
    /// Block moments at the current state, kept between Newton steps.
    block_cache: Option<(Vec<usize>, Vec<f64>, DMatrix<f64>)>,
}

impl Engine {
    pub fn new(
        design: &dyn DesignMatrix,
        outcome: Outcome<'_>,
        rows: Option<&[usize]>,
        weights: &[f64],
        constraint: Constraint,
        options: SolverOptions,
    ) -> Result<Self> {
        let risk = match rows {
            Some(r) => RiskSets::subset(outcome, r)?,
            None => RiskSets::new(outcome)?,
        };
        let n = risk.len();
        let cols = (0..design.n_cols())
            .map(|k| {
                let col = design.column(k);
                let mut entries: Vec<(u32, f64)> = col
                    .rows()
                    .iter()
                    .enumerate()
                    .filter_map(|(e, &r)| risk.position_of(r as usize).map(|p| (p as u32, col.value_at(e))))
                    .collect();
                entries.sort_unstable_by_key(|e| std::cmp::Reverse(e.0));
                let event_sum = entries.iter().filter(|(p, _)| risk.is_event_at(*p as usize)).map(|(_, v)| v).sum();
                let max_abs = entries.iter().fold(0.0f64, |m, (_, v)| m.max(v.abs()));
                let (pos, vals): (Vec<u32>, Vec<f64>) = entries.into_iter().unzip();
                SortedColumn {
                    pos,
                    vals: if col.is_indicator() { None } else { Some(vals) },
                    event_sum,
                    max_abs,
                }
            })
            .collect();
        let event_pos = (0..n).filter(|&p| risk.is_event_at(p)).map(|p| p as u32).collect();
        let g = risk.groups().len();
        let max_weight = weights.iter().cloned().fold(0.0, f64::max);
        let mut engine = Self {
            risk,
            n: n as f64,
            cols,
            event_pos,
            eta: vec![0.0; n],
            w: vec![1.0; n],
            shift: 0.0,
            s0g: vec![0.0; g],
            s1g: vec![0.0; g],
            resid: vec![0.0; n],
            hazard: vec![0.0; g + 1],
            beta: vec![0.0; design.n_cols()],
            weights: weights.to_vec(),
            max_weight,
            constraint,
            options,
            sqrt_event_weight: Vec::new(),
            block_cache: None,
        };
        engine.sqrt_event_weight = engine.risk.groups().iter().map(|g| (g.n_events as f64 / engine.n).sqrt()).collect();
        engine.refresh();
        Ok(engine)
    }

    pub fn n_obs(&self) -> usize {
        self.risk.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn set_beta(&mut self, beta: &[f64]) {
        self.block_cache = None;
        self.beta.copy_from_slice(beta);
        self.eta.iter_mut().for_each(|v| *v = 0.0);
        for (k, &b) in beta.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            let col = &self.cols[k];
            for (e, &p) in col.pos.iter().enumerate() {
                self.eta[p as usize] += b * col.value(e);
            }
        }
        self.refresh();
    }

    /// Recomputes weights and group risk sums exactly from `eta`.
    fn refresh(&mut self) {
        self.shift = self.eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !self.shift.is_finite() {
            self.shift = 0.0;
        }
        let shift = self.shift;
        for (w, &e) in self.w.iter_mut().zip(&self.eta) {
            *w = (e - shift).exp();
        }
        let groups = self.risk.groups();
        let mut acc = 0.0;
        let mut next = self.w.len();
        for gi in (0..groups.len()).rev() {
            let start = groups[gi].start as usize;
            while next > start {
                next -= 1;
                acc += self.w[next];
            }
            self.s0g[gi] = acc;
        }
    }

    fn refresh_residuals(&mut self) {
        self.risk.residuals(&self.w, &self.s0g, &mut self.resid, &mut self.hazard);
    }

    /// Scaled negative log-partial likelihood at the current state.
    pub fn nll(&self) -> f64 {
        let mut total: f64 = self.event_pos.iter().map(|&p| self.eta[p as usize] - self.shift).sum();
        for (g, s0) in self.risk.groups().iter().zip(&self.s0g) {
            total -= g.n_events as f64 * s0.ln();
        }
        -total / self.n
    }

    #[inline]
    fn penalty_weight(&self, k: usize, lambda: f64) -> f64 {
        let w = self.weights[k];
        if w == 0.0 {
            0.0
        } else {
            lambda * w
        }
    }

    pub fn penalty(&self, lambda: f64) -> f64 {
        (0..self.beta.len()).map(|k| self.penalty_weight(k, lambda) * self.beta[k].abs()).sum()
    }

    #[inline]
    fn violation(&self, b: f64, g: f64, pen: f64) -> f64 {
        if b > 0.0 {
            (g + pen).abs()
        } else if b < 0.0 {
            (g - pen).abs()
        } else {
            match self.constraint {
                Constraint::None => (g.abs() - pen).max(0.0),
                Constraint::NonNegative => (-g - pen).max(0.0),
            }
        }
    }

    /// Score and curvature of column `k`; fills `s1g` with the per-group weighted column sums.
    fn column_stats(&mut self, k: usize) -> (f64, f64) {
        let col = &self.cols[k];
        let groups = self.risk.groups();
        let (mut s1, mut s2) = (0.0, 0.0);
        let (mut gacc, mut hacc) = (0.0, 0.0);
        let mut e = 0;
        let npos = col.pos.len();
        match &col.vals {
            None => {
                for gi in (0..groups.len()).rev() {
                    let start = groups[gi].start;
                    while e < npos && col.pos[e] >= start {
                        s1 += self.w[col.pos[e] as usize];
                        e += 1;
                    }
                    self.s1g[gi] = s1;
                    let m1 = s1 / self.s0g[gi];
                    let d = groups[gi].n_events as f64;
                    gacc += d * m1;
                    hacc += d * m1 * (1.0 - m1);
                }
            }
            Some(vals) => {
                for gi in (0..groups.len()).rev() {
                    let start = groups[gi].start;
                    while e < npos && col.pos[e] >= start {
                        let v = vals[e];
                        let wv = self.w[col.pos[e] as usize] * v;
                        s1 += wv;
                        s2 += wv * v;
                        e += 1;
                    }
                    self.s1g[gi] = s1;
                    let s0 = self.s0g[gi];
                    let m1 = s1 / s0;
                    let d = groups[gi].n_events as f64;
                    gacc += d * m1;
                    hacc += d * (s2 / s0 - m1 * m1);
                }
            }
        }
        ((gacc - col.event_sum) / self.n, (hacc / self.n).max(0.0))
    }

    /// Change of the scaled nll when `beta_k` moves by `delta` (requires fresh `s1g` for
    /// 0/1 columns).
    fn nll_change(&self, k: usize, delta: f64) -> f64 {
        let col = &self.cols[k];
        let groups = self.risk.groups();
        let mut acc = -delta * col.event_sum;
        match &col.vals {
            None => {
                let f = delta.exp_m1();
                for (gi, g) in groups.iter().enumerate() {
                    acc += g.n_events as f64 * (f * self.s1g[gi] / self.s0g[gi]).ln_1p();
                }
            }
            Some(vals) => {
                let mut add = 0.0;
                let mut e = 0;
                for gi in (0..groups.len()).rev() {
                    let start = groups[gi].start;
                    while e < col.pos.len() && col.pos[e] >= start {
                        add += self.w[col.pos[e] as usize] * (delta * vals[e]).exp_m1();
                        e += 1;
                    }
                    acc += groups[gi].n_events as f64 * (add / self.s0g[gi]).ln_1p();
                }
            }
        }
        acc / self.n
    }

    fn apply_step(&mut self, k: usize, delta: f64) {
        self.block_cache = None;
        let col = &self.cols[k];
        let groups = self.risk.groups();
        match &col.vals {
            None => {
                let f = delta.exp();
                for &p in &col.pos {
                    self.eta[p as usize] += delta;
                    self.w[p as usize] *= f;
                }
                let fm1 = f - 1.0;
                for (s0, s1) in self.s0g.iter_mut().zip(&self.s1g) {
                    *s0 += fm1 * s1;
                }
            }
            Some(vals) => {
                let mut add = 0.0;
                let mut e = 0;
                for gi in (0..groups.len()).rev() {
                    let start = groups[gi].start;
                    while e < col.pos.len() && col.pos[e] >= start {
                        let p = col.pos[e] as usize;
                        let dv = delta * vals[e];
                        let dw = self.w[p] * dv.exp_m1();
                        self.w[p] += dw;
                        self.eta[p] += dv;
                        add += dw;
                        e += 1;
                    }
                    self.s0g[gi] += add;
                }
            }
        }
        self.beta[k] += delta;
    }

    /// One coordinate update; returns `(|step|, violation before the step)`.
    fn update(&mut self, k: usize, lambda: f64) -> (f64, f64) {
        let (g, h) = self.column_stats(k);
        let pen = self.penalty_weight(k, lambda);
        let b = self.beta[k];
        let viol = self.violation(b, g, pen);
        if h <= 0.0 || !h.is_finite() {
            return (0.0, viol);
        }
        let z = b - g / h;
        let thr = pen / h;
        let mut target = if z > thr {
            z - thr
        } else if z < -thr {
            z + thr
        } else {
            0.0
        };
        if self.constraint == Constraint::NonNegative && target < 0.0 {
            target = 0.0;
        }
        let mut delta = target - b;
        if delta == 0.0 {
            return (0.0, viol);
        }
        if delta.abs() * self.cols[k].max_abs > SAFEGUARD_STEP {
            let mut accepted = false;
            for _ in 0..50 {
                let new_b = b + delta;
                let change = self.nll_change(k, delta) + pen * (new_b.abs() - b.abs());
                if change <= 0.0 {
                    accepted = true;
                    break;
                }
                delta *= 0.5;
            }
            if !accepted {
                return (0.0, viol);
            }
        }
        // land exactly on zero when the step targets it
        if target == 0.0 && delta == -b {
            self.apply_step(k, delta);
            self.beta[k] = 0.0;
        } else {
            self.apply_step(k, delta);
        }
        if self.constraint == Constraint::NonNegative && self.beta[k] < 0.0 {
            self.beta[k] = 0.0;
        }
        (delta.abs(), viol)
    }

    /// Zero penalized coordinates whose KKT condition fails by more than `target`, from the
    /// residual form of the gradient.
    fn violators(&mut self, lambda: f64, target: f64) -> Vec<usize> {
        self.refresh();
        self.refresh_residuals();
        let mut out = Vec::new();
        for k in 0..self.cols.len() {
            let pen = self.penalty_weight(k, lambda);
            if self.beta[k] != 0.0 || self.weights[k] == 0.0 {
                continue;
            }
            let col = &self.cols[k];
            let mut acc = 0.0;
            match &col.vals {
                None => {
                    for &p in &col.pos {
                        acc += self.resid[p as usize];
                    }
                }
                Some(v) => {
                    for (e, &p) in col.pos.iter().enumerate() {
                        acc += v[e] * self.resid[p as usize];
                    }
                }
            }
            if self.violation(0.0, -acc / self.n, pen) > target {
                out.push(k);
            }
        }
        out
    }

    fn active_cycle(&mut self, lambda: f64, active: &[usize]) -> CycleStats {
        let mut stats = CycleStats::default();
        for &k in active {
            let (step, viol) = self.update(k, lambda);
            stats.max_violation = stats.max_violation.max(viol);
            stats.max_delta = stats.max_delta.max(step);
        }
        stats
    }

    fn active_set(&self) -> Vec<usize> {
        (0..self.beta.len()).filter(|&k| self.beta[k] != 0.0 || self.weights[k] == 0.0).collect()
    }

    /// KKT tolerance used by certificates at this lambda.
    pub fn kkt_tolerance(&self, lambda: f64) -> f64 {
        super::kkt_tolerance(lambda, self.max_weight)
    }

    /// Minimizes the penalized objective at `lambda`, starting from the current state.
    ///
    /// Alternates a KKT screen of the zero coordinates with optimization of the active block
    /// until no coordinate violates its optimality condition.
    pub fn solve(&mut self, lambda: f64) -> SolveOutcome {
        let target = 0.1 * self.kkt_tolerance(lambda);
        let mut cycles = 0;
        let mut active = self.active_set();
        loop {
            let entering = self.violators(lambda, target);
            cycles += 1;
            if entering.is_empty() && cycles > 1 {
                return SolveOutcome { converged: true, cycles };
            }
            active.extend(entering);
            active.sort_unstable();
            if !self.optimize_block(lambda, &active, target, &mut cycles) {
                return SolveOutcome { converged: false, cycles };
            }
            active = self.active_set();
        }
    }

    /// Optimizes the coordinates in `block` with the rest held fixed; false at the cycle cap.
    ///
    /// Takes proximal Newton steps on the block, falling back to plain coordinate cycles for
    /// very large blocks or when a Newton step finds no descent.
    fn optimize_block(&mut self, lambda: f64, block: &[usize], target: f64, cycles: &mut usize) -> bool {
        if block.is_empty() {
            return true;
        }
        let opts = self.options;
        let mut use_newton = block.len() <= NEWTON_MAX_ACTIVE;
        loop {
            if *cycles >= opts.max_cycles {
                return false;
            }
            let stats = match use_newton.then(|| self.newton_step(lambda, block)).flatten() {
                Some(s) => s,
                None => {
                    use_newton = false;
                    let before = self.nll() + self.penalty(lambda);
                    let mut s = self.active_cycle(lambda, block);
                    let after = self.nll() + self.penalty(lambda);
                    if (before - after) / after.abs().max(1e-12) < opts.rel_objective_tol && s.max_violation <= target {
                        s.max_delta = 0.0;
                    }
                    s
                }
            };
            *cycles += 1;
            if stats.max_delta < opts.coef_tol || stats.max_violation <= target {
                return true;
            }
        }
    }

    /// Gradient of the block and the event-weighted risk-set means of its columns.
    fn block_moments(&mut self, active: &[usize]) -> (Vec<f64>, DMatrix<f64>) {
        let n_groups = self.s0g.len();
        let mut grad = vec![0.0; active.len()];
        let mut m = DMatrix::<f64>::zeros(n_groups, active.len());
        for (j, &k) in active.iter().enumerate() {
            grad[j] = self.column_stats(k).0;
            for (gi, out) in m.column_mut(j).iter_mut().enumerate() {
                *out = self.s1g[gi] / self.s0g[gi] * self.sqrt_event_weight[gi];
            }
        }
        (grad, m)
    }

    /// One proximal Newton step on the active block: the quadratic model uses the exact
    /// block Hessian and is minimized by coordinate descent, followed by a backtracking line
    /// search on the penalized objective. `None` when no descent is found.
    fn newton_step(&mut self, lambda: f64, active: &[usize]) -> Option<CycleStats> {
        self.refresh();
        self.refresh_residuals();
        let a = active.len();
        let n = self.eta.len();
        let (grad, m) = match self.block_cache.take() {
            Some((block, grad, m)) if block == active => (grad, m),
            _ => self.block_moments(active),
        };
        let mut xs = DMatrix::<f64>::zeros(n, a);
        for (j, &k) in active.iter().enumerate() {
            let col = &self.cols[k];
            for (e, &p) in col.pos.iter().enumerate() {
                let p = p as usize;
                let d = self.w[p] * self.hazard[self.risk.groups_through(p)] / self.n;
                xs[(p, j)] = col.value(e) * d.sqrt();
            }
        }
        let hess = xs.transpose() * &xs - m.transpose() * &m;

        let pens: Vec<f64> = active.iter().map(|&k| self.penalty_weight(k, lambda)).collect();
        let mut stats = CycleStats::default();
        for j in 0..a {
            let v = self.violation(self.beta[active[j]], grad[j], pens[j]);
            stats.max_violation = stats.max_violation.max(v);
        }

        // coordinate descent on the quadratic model
        let mut delta = vec![0.0; a];
        let mut hd = vec![0.0; a];
        // sweeps alternate between the whole block and its nonzero part
        let mut full_sweep = true;
        let beta_block: Vec<f64> = active.iter().map(|&k| self.beta[k]).collect();
        let mut last_support: Vec<bool> = beta_block.iter().map(|&b| b != 0.0).collect();
        let mut tried: Option<Vec<bool>> = None;
        for _ in 0..5000 {
            let mut biggest = 0.0f64;
            for j in 0..a {
                let h = hess[(j, j)];
                let b = self.beta[active[j]];
                let cur = b + delta[j];
                if h <= 1e-14 || (!full_sweep && cur == 0.0) {
                    continue;
                }
                let z = cur - (grad[j] + hd[j]) / h;
                let thr = pens[j] / h;
                let mut t = if z > thr {
                    z - thr
                } else if z < -thr {
                    z + thr
                } else {
                    0.0
                };
                if self.constraint == Constraint::NonNegative && t < 0.0 {
                    t = 0.0;
                }
                let change = t - cur;
                if change != 0.0 {
                    delta[j] += change;
                    for (i, v) in hd.iter_mut().enumerate() {
                        *v += hess[(i, j)] * change;
                    }
                    biggest = biggest.max(change.abs());
                }
            }
            if biggest < 1e-13 {
                if full_sweep {
                    break;
                }
                full_sweep = true;
            } else {
                full_sweep = false;
            }
            // once the sweeps settle on a support, try solving the model on it directly
            let support: Vec<bool> = (0..a).map(|j| beta_block[j] + delta[j] != 0.0).collect();
            if support == last_support && tried.as_ref() != Some(&support) {
                let current: Vec<f64> = (0..a).map(|j| beta_block[j] + delta[j]).collect();
                if let Some(d) = solve_on_support(&hess, &grad, &pens, &beta_block, &current, self.constraint) {
                    delta = d;
                    break;
                }
                tried = Some(support.clone());
            }
            last_support = support;
        }

        let pen_of = |beta: &[f64], step: &[f64], t: f64| -> f64 {
            (0..a).map(|j| pens[j] * (beta[active[j]] + t * step[j]).abs()).sum()
        };
        let pen0 = pen_of(&self.beta, &delta, 0.0);
        let predicted: f64 = grad.iter().zip(&delta).map(|(g, d)| g * d).sum::<f64>() + pen_of(&self.beta, &delta, 1.0) - pen0;
        if !(predicted < 0.0) {
            stats.max_delta = 0.0;
            return if stats.max_violation <= 0.1 * self.kkt_tolerance(lambda) { Some(stats) } else { None };
        }
        let f0 = self.nll() + pen0;
        let mut direction = vec![0.0; n];
        for (j, &k) in active.iter().enumerate() {
            let col = &self.cols[k];
            for (e, &p) in col.pos.iter().enumerate() {
                direction[p as usize] += delta[j] * col.value(e);
            }
        }
        let mut t = 1.0;
        let mut trial = vec![0.0; n];
        for _ in 0..40 {
            for p in 0..n {
                trial[p] = self.eta[p] + t * direction[p];
            }
            let f = self.nll_at(&trial) + pen_of(&self.beta, &delta, t);
            if f <= f0 + 1e-4 * t * predicted {
                self.block_cache = None;
                std::mem::swap(&mut self.eta, &mut trial);
                for (j, &k) in active.iter().enumerate() {
                    let nb = if t == 1.0 { self.beta[k] + delta[j] } else { self.beta[k] + t * delta[j] };
                    // keep exact zeros that the model asked for
                    self.beta[k] = if t == 1.0 && (nb.abs() < 1e-300 || self.beta[k] == -delta[j]) { 0.0 } else { nb };
                    if self.constraint == Constraint::NonNegative && self.beta[k] < 0.0 {
                        self.beta[k] = 0.0;
                    }
                    stats.max_delta = stats.max_delta.max((t * delta[j]).abs());
                }
                self.refresh();
                let (g, m) = self.block_moments(active);
                stats.max_violation = 0.0;
                for (j, &k) in active.iter().enumerate() {
                    stats.max_violation = stats.max_violation.max(self.violation(self.beta[k], g[j], pens[j]));
                }
                self.block_cache = Some((active.to_vec(), g, m));
                return Some(stats);
            }
            t *= 0.5;
        }
        None
    }

    /// Scaled nll for linear predictors given in sorted order.
    fn nll_at(&self, eta: &[f64]) -> f64 {
        let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let groups = self.risk.groups();
        let mut total: f64 = self.event_pos.iter().map(|&p| eta[p as usize] - shift).sum();
        let mut acc = 0.0;
        let mut next = eta.len();
        for gi in (0..groups.len()).rev() {
            let start = groups[gi].start as usize;
            while next > start {
                next -= 1;
                acc += (eta[next] - shift).exp();
            }
            total -= groups[gi].n_events as f64 * acc.ln();
        }
        -total / self.n
    }

    /// Optimizes only the unpenalized coordinates, holding the rest fixed.
    pub fn solve_unpenalized_only(&mut self) -> SolveOutcome {
        let free: Vec<usize> = (0..self.beta.len()).filter(|&k| self.weights[k] == 0.0).collect();
        let mut cycles = 0;
        if free.is_empty() {
            return SolveOutcome { converged: true, cycles };
        }
        loop {
            self.refresh();
            let s = self.active_cycle(0.0, &free);
            cycles += 1;
            if s.max_delta < self.options.coef_tol || s.max_violation <= 1e-10 {
                return SolveOutcome { converged: true, cycles };
            }
            if cycles >= self.options.max_cycles {
                return SolveOutcome { converged: false, cycles };
            }
        }
    }

    /// Exact gradient of the scaled nll at the current state.
    pub fn gradient(&mut self) -> Vec<f64> {
        self.refresh();
        self.refresh_residuals();
        self.cols
            .iter()
            .map(|col| {
                let mut acc = 0.0;
                for (e, &p) in col.pos.iter().enumerate() {
                    acc += col.value(e) * self.resid[p as usize];
                }
                -acc / self.n
            })
            .collect()
    }

    /// Exact nll after a refresh; used when reporting fits.
    pub fn exact_nll(&mut self) -> f64 {
        self.refresh();
        self.nll()
    }
}

/// Step minimizing the block's penalized quadratic model among coefficients with the support
/// and signs of `current`; `None` unless the zero coordinates also satisfy their optimality
/// conditions.
fn solve_on_support(
    hess: &DMatrix<f64>,
    grad: &[f64],
    pens: &[f64],
    beta: &[f64],
    current: &[f64],
    constraint: Constraint,
) -> Option<Vec<f64>> {
    let a = grad.len();
    let support: Vec<bool> = current.iter().map(|&c| c != 0.0).collect();
    let on: Vec<usize> = (0..a).filter(|&j| support[j]).collect();
    let sign = |v: f64| if v > 0.0 { 1.0 } else { -1.0 };
    let mut delta: Vec<f64> = (0..a).map(|j| if support[j] { 0.0 } else { -beta[j] }).collect();
    if !on.is_empty() {
        let h_on = DMatrix::from_fn(on.len(), on.len(), |r, c| hess[(on[r], on[c])]);
        let chol = h_on.cholesky()?;
        let mut rhs = nalgebra::DVector::zeros(on.len());
        for (r, &j) in on.iter().enumerate() {
            let mut v = -grad[j];
            for i in 0..a {
                if !support[i] {
                    v -= hess[(j, i)] * delta[i];
                }
            }
            rhs[r] = v;
        }
        // a sign change of a penalized coordinate invalidates the solve, so iterate signs
        let mut signs: Vec<f64> = on.iter().map(|&j| sign(current[j])).collect();
        let mut solved = None;
        for _ in 0..3 {
            let mut b = rhs.clone();
            for (r, &j) in on.iter().enumerate() {
                b[r] -= pens[j] * signs[r];
            }
            let x = chol.solve(&b);
            let new_signs: Vec<f64> = on.iter().enumerate().map(|(r, &j)| sign(beta[j] + x[r])).collect();
            let consistent = on.iter().enumerate().all(|(r, &j)| pens[j] == 0.0 || new_signs[r] == signs[r]);
            if consistent {
                solved = Some(x);
                break;
            }
            signs = new_signs;
        }
        let x = solved?;
        for (r, &j) in on.iter().enumerate() {
            let u = beta[j] + x[r];
            if u == 0.0 || (constraint == Constraint::NonNegative && u < 0.0) {
                return None;
            }
            if pens[j] > 0.0 && u.signum() != signs[r] {
                return None;
            }
            delta[j] = x[r];
        }
    }
    let dv = nalgebra::DVector::from_column_slice(&delta);
    let hd: Vec<f64> = (hess * dv).iter().copied().collect();
    for j in (0..a).filter(|&j| !support[j]) {
        let g = grad[j] + hd[j];
        let excess = match constraint {
            Constraint::None => g.abs() - pens[j],
            Constraint::NonNegative => -g - pens[j],
        };
        if excess > 1e-12 * (1.0 + pens[j]) {
            return None;
        }
    }
    Some(delta)
}
