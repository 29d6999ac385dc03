//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use binilasso::data::SurvivalDataset;
use binilasso::design::RealDesign;
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random survival problem with real covariates and some tied times.
pub struct Instance {
    pub x: Vec<Vec<f64>>, // columns
    pub times: Vec<f64>,
    pub events: Vec<bool>,
}

impl Instance {
    pub fn random(seed: u64, n: usize, d: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..d).map(|_| (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect();
        // times on a coarse lattice so ties occur
        let times: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=n.max(4) * 2 / 3 + 2) as f64 * 0.5).collect();
        let mut events: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
        if !events.iter().any(|&e| e) {
            events[0] = true;
        }
        Self { x, times, events }
    }

    /// Instance drawn from a Cox model with the given coefficients.
    pub fn from_model(seed: u64, n: usize, beta: &[f64]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = beta.iter().map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut times = Vec::with_capacity(n);
        let mut events = Vec::with_capacity(n);
        for i in 0..n {
            let lp: f64 = beta.iter().zip(&x).map(|(b, col)| b * col[i]).sum();
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            let t = -u.ln() / lp.exp();
            let c = rng.gen_range(0.0..3.0);
            times.push(t.min(c));
            events.push(t <= c);
        }
        Self { x, times, events }
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn d(&self) -> usize {
        self.x.len()
    }

    pub fn design(&self) -> RealDesign {
        RealDesign::from_columns(self.n(), &self.x)
    }

    pub fn lp(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| beta.iter().enumerate().map(|(k, b)| b * self.x[k][i]).sum()).collect()
    }

    pub fn dataset(&self) -> SurvivalDataset {
        let n = self.n();
        let d = self.d();
        let features = Array2::from_shape_fn((n, d), |(i, k)| self.x[k][i]);
        let names = (1..=d).map(|k| format!("x{k}")).collect();
        SurvivalDataset::new(features, self.times.clone(), self.events.clone(), names).unwrap()
    }
}

/// Breslow negative log-partial likelihood divided by n, by direct O(n^2) summation.
pub fn naive_nll(lp: &[f64], times: &[f64], events: &[bool]) -> f64 {
    let n = lp.len();
    let mut total = 0.0;
    for i in 0..n {
        if !events[i] {
            continue;
        }
        let denom: f64 = (0..n).filter(|&j| times[j] >= times[i]).map(|j| lp[j].exp()).sum();
        total += lp[i] - denom.ln();
    }
    -total / n as f64
}

/// Gradient and Hessian of [`naive_nll`] in beta, by direct summation.
pub fn naive_derivatives(inst: &Instance, beta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let (n, d) = (inst.n(), inst.d());
    let lp = inst.lp(beta);
    let mut g = DVector::zeros(d);
    let mut h = DMatrix::zeros(d, d);
    for i in 0..n {
        if !inst.events[i] {
            continue;
        }
        let at_risk: Vec<usize> = (0..n).filter(|&j| inst.times[j] >= inst.times[i]).collect();
        let s0: f64 = at_risk.iter().map(|&j| lp[j].exp()).sum();
        let mean = DVector::from_fn(d, |k, _| at_risk.iter().map(|&j| lp[j].exp() * inst.x[k][j]).sum::<f64>() / s0);
        for k in 0..d {
            g[k] -= inst.x[k][i] - mean[k];
            for l in 0..d {
                let s2: f64 = at_risk.iter().map(|&j| lp[j].exp() * inst.x[k][j] * inst.x[l][j]).sum::<f64>() / s0;
                h[(k, l)] += s2 - mean[k] * mean[l];
            }
        }
    }
    (g / n as f64, h / n as f64)
}

/// Unpenalized Cox estimate by full Newton with step halving on the naive likelihood.
pub fn newton_cox(inst: &Instance) -> Vec<f64> {
    let d = inst.d();
    let mut beta = vec![0.0; d];
    let f = |b: &[f64]| naive_nll(&inst.lp(b), &inst.times, &inst.events);
    let mut value = f(&beta);
    for _ in 0..100 {
        let (g, h) = naive_derivatives(inst, &beta);
        if g.amax() < 1e-13 {
            break;
        }
        let step = h.lu().solve(&g).expect("Hessian is singular");
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = (0..d).map(|k| beta[k] - t * step[k]).collect();
            let v = f(&cand);
            if v <= value || t < 1e-8 {
                beta = cand;
                value = v;
                break;
            }
            t *= 0.5;
        }
    }
    beta
}

/// Minimum of `nll + lambda * sum|beta|` over the grid {-3, -2.99, ..., 3}^d, d <= 2.
pub fn brute_force_min(inst: &Instance, lambda: f64) -> f64 {
    let d = inst.d();
    assert!(d <= 2);
    let n = inst.n();
    // sort once so each evaluation is a single reverse pass
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| inst.times[b].total_cmp(&inst.times[a]));
    let grid: Vec<f64> = (0..=600).map(|k| -3.0 + 0.01 * k as f64).collect();
    let eval = |beta: &[f64]| -> f64 {
        let lp = inst.lp(beta);
        let mut acc = 0.0;
        let mut total = 0.0;
        let mut p = 0;
        while p < n {
            let t = inst.times[order[p]];
            let mut q = p;
            while q < n && inst.times[order[q]] == t {
                acc += lp[order[q]].exp();
                q += 1;
            }
            for &i in &order[p..q] {
                if inst.events[i] {
                    total += lp[i] - acc.ln();
                }
            }
            p = q;
        }
        -total / n as f64 + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    };
    let mut best = f64::INFINITY;
    if d == 1 {
        for &a in &grid {
            best = best.min(eval(&[a]));
        }
    } else {
        for &a in &grid {
            for &b in &grid {
                best = best.min(eval(&[a, b]));
            }
        }
    }
    best
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_diff(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[k] += h;
            down[k] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Norm-wise relative error of `a` against reference `b`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    max_abs_diff(a, b) / max_abs(b).max(1e-12)
}
