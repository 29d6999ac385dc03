//! Weighted, optionally sign-constrained L1-penalized Cox estimation.

mod cv;
mod engine;
mod path;

use serde::Serialize;

use crate::cox::{self, RiskSets};
use crate::data::Outcome;
use crate::design::DesignMatrix;
use crate::error::{Error, Result};

pub use cv::{stratified_folds, CvConfig, CvResult, LambdaRule};
pub use path::{LassoPath, PathConfig};

use engine::Engine;

/// Sign constraint on the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    #[default]
    None,
    NonNegative,
}

/// Per-coordinate penalty weights; zero marks an unpenalized coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyWeights(Vec<f64>);

impl PenaltyWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidWeights(format!("weight {w} is not a finite nonnegative number")));
        }
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(Error::AllWeightsZero);
        }
        Ok(Self(weights))
    }

    pub fn ones(d: usize) -> Self {
        Self(vec![1.0; d])
    }

    /// Unit weights except zeros at `exempt`.
    pub fn with_exempt(d: usize, exempt: &[usize]) -> Result<Self> {
        let mut w = vec![1.0; d];
        for &k in exempt {
            w[k] = 0.0;
        }
        Self::new(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_cycles: usize,
    pub rel_objective_tol: f64,
    pub coef_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_cycles: 10_000, rel_objective_tol: 1e-7, coef_tol: 1e-9 }
    }
}

/// Solution at one lambda.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoxFit {
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub nll_value: f64,
    pub objective_value: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub active_set: Vec<usize>,
    pub n_obs: usize,
}

impl CoxFit {
    pub fn n_active(&self) -> usize {
        self.active_set.len()
    }
}

/// Outcome of a KKT check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktCertificate {
    pub passed: bool,
    pub tolerance: f64,
    pub worst_violation: f64,
    pub worst_coordinate: Option<usize>,
}

pub(crate) fn kkt_tolerance(lambda: f64, max_weight: f64) -> f64 {
    1e-4 * lambda * max_weight + 1e-8
}

/// Configured penalized Cox problem over a design and outcome.
pub struct CoxLasso<'a> {
    design: &'a dyn DesignMatrix,
    outcome: Outcome<'a>,
    weights: PenaltyWeights,
    constraint: Constraint,
    options: SolverOptions,
}

impl<'a> CoxLasso<'a> {
    pub fn new(design: &'a dyn DesignMatrix, outcome: Outcome<'a>) -> Result<Self> {
        if design.n_rows() != outcome.len() {
            return Err(Error::DimensionMismatch { expected: outcome.len(), found: design.n_rows() });
        }
        if outcome.n_events() == 0 {
            return Err(Error::NoEvents);
        }
        Ok(Self {
            design,
            outcome,
            weights: PenaltyWeights(vec![1.0; design.n_cols()]),
            constraint: Constraint::None,
            options: SolverOptions::default(),
        })
    }

    pub fn weights(mut self, weights: PenaltyWeights) -> Result<Self> {
        if weights.len() != self.design.n_cols() {
            return Err(Error::DimensionMismatch { expected: self.design.n_cols(), found: weights.len() });
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn constraint(mut self, constraint: Constraint) -> Self {
        self.constraint = constraint;
        self
    }

    pub fn options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    pub fn design(&self) -> &'a dyn DesignMatrix {
        self.design
    }

    pub fn outcome(&self) -> Outcome<'a> {
        self.outcome
    }

    pub fn penalty_weights(&self) -> &PenaltyWeights {
        &self.weights
    }

    pub(crate) fn engine(&self, rows: Option<&[usize]>) -> Result<Engine> {
        Engine::new(self.design, self.outcome, rows, self.weights.as_slice(), self.constraint, self.options)
    }

    pub(crate) fn lambda_max_of(&self, engine: &mut Engine) -> f64 {
        engine.beta.iter_mut().for_each(|b| *b = 0.0);
        let zeros = vec![0.0; engine.n_cols()];
        engine.set_beta(&zeros);
        engine.solve_unpenalized_only();
        let g = engine.gradient();
        let w = self.weights.as_slice();
        let lmax = (0..g.len())
            .filter(|&k| w[k] > 0.0)
            .map(|k| g[k].abs() / w[k])
            .fold(0.0, f64::max);
        if lmax > 0.0 {
            lmax
        } else {
            f64::MIN_POSITIVE.sqrt()
        }
    }

    /// Smallest lambda at which every penalized coefficient is zero.
    pub fn lambda_max(&self) -> Result<f64> {
        if self.design.n_cols() == 0 {
            return Ok(0.0);
        }
        let mut engine = self.engine(None)?;
        Ok(self.lambda_max_of(&mut engine))
    }

    pub(crate) fn snapshot(&self, engine: &mut Engine, lambda: f64, cycles: usize, converged: bool) -> CoxFit {
        let nll_value = engine.exact_nll();
        let penalty = engine.penalty(lambda);
        CoxFit {
            beta: engine.beta.clone(),
            lambda,
            nll_value,
            objective_value: nll_value + penalty,
            n_iterations: cycles,
            converged,
            active_set: (0..engine.beta.len()).filter(|&k| engine.beta[k] != 0.0).collect(),
            n_obs: engine.n_obs(),
        }
    }

    /// Penalized fit at a single lambda.
    pub fn fit(&self, lambda: f64, warm_start: Option<&[f64]>) -> Result<CoxFit> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidConfig(format!("lambda must be finite and nonnegative, got {lambda}")));
        }
        let mut engine = self.engine(None)?;
        if let Some(b) = warm_start {
            if b.len() != self.design.n_cols() {
                return Err(Error::DimensionMismatch { expected: self.design.n_cols(), found: b.len() });
            }
            let mut b = b.to_vec();
            if self.constraint == Constraint::NonNegative {
                b.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            engine.set_beta(&b);
        }
        let out = engine.solve(lambda);
        if !out.converged {
            log::warn!("coordinate descent hit the cycle cap at lambda {lambda}");
        }
        Ok(self.snapshot(&mut engine, lambda, out.cycles, out.converged))
    }

    /// Checks the optimality conditions of `fit` against an independently computed gradient.
    pub fn kkt_check(&self, fit: &CoxFit) -> Result<KktCertificate> {
        if fit.beta.len() != self.design.n_cols() {
            return Err(Error::DimensionMismatch { expected: self.design.n_cols(), found: fit.beta.len() });
        }
        let risk = RiskSets::new(self.outcome)?;
        let lp = self.design.linear_predictor(&fit.beta);
        let g = cox::gradient_with(&risk, self.design, &lp);
        Ok(kkt_certificate(&g, &fit.beta, fit.lambda, self.weights.as_slice(), self.constraint))
    }
}

/// KKT certificate from a gradient of the scaled nll.
pub fn kkt_certificate(
    gradient: &[f64],
    beta: &[f64],
    lambda: f64,
    weights: &[f64],
    constraint: Constraint,
) -> KktCertificate {
    let max_w = weights.iter().cloned().fold(0.0, f64::max);
    let tol = kkt_tolerance(lambda, max_w);
    let mut worst = 0.0;
    let mut worst_k = None;
    for k in 0..beta.len() {
        let pen = lambda * weights[k];
        let g = gradient[k];
        let b = beta[k];
        let v = if b > 0.0 {
            (g + pen).abs()
        } else if b < 0.0 {
            if constraint == Constraint::NonNegative {
                f64::INFINITY
            } else {
                (g - pen).abs()
            }
        } else {
            match constraint {
                Constraint::None => (g.abs() - pen).max(0.0),
                Constraint::NonNegative => (-g - pen).max(0.0),
            }
        };
        if v > worst {
            worst = v;
            worst_k = Some(k);
        }
    }
    KktCertificate { passed: worst <= tol, tolerance: tol, worst_violation: worst, worst_coordinate: worst_k }
}

/// Free-function form of [`CoxLasso::lambda_max`].
pub fn lambda_max(design: &dyn DesignMatrix, outcome: Outcome<'_>, weights: &PenaltyWeights) -> Result<f64> {
    CoxLasso::new(design, outcome)?.weights(weights.clone())?.lambda_max()
}

/// Free-function form of [`CoxLasso::fit`].
pub fn fit(
    design: &dyn DesignMatrix,
    outcome: Outcome<'_>,
    lambda: f64,
    weights: &PenaltyWeights,
    constraint: Constraint,
    warm_start: Option<&[f64]>,
) -> Result<CoxFit> {
    CoxLasso::new(design, outcome)?.weights(weights.clone())?.constraint(constraint).fit(lambda, warm_start)
}

/// Free-function form of [`CoxLasso::fit_path`].
pub fn fit_path(
    design: &dyn DesignMatrix,
    outcome: Outcome<'_>,
    weights: &PenaltyWeights,
    constraint: Constraint,
    config: &PathConfig,
) -> Result<LassoPath> {
    CoxLasso::new(design, outcome)?.weights(weights.clone())?.constraint(constraint).fit_path(config)
}

/// Free-function form of [`CoxLasso::cross_validate`].
pub fn cross_validate(
    design: &dyn DesignMatrix,
    outcome: Outcome<'_>,
    weights: &PenaltyWeights,
    constraint: Constraint,
    config: &CvConfig,
) -> Result<CvResult> {
    CoxLasso::new(design, outcome)?.weights(weights.clone())?.constraint(constraint).cross_validate(config)
}

/// Free-function form of [`CoxLasso::kkt_check`].
pub fn kkt_check(
    fit: &CoxFit,
    design: &dyn DesignMatrix,
    outcome: Outcome<'_>,
    weights: &PenaltyWeights,
    constraint: Constraint,
) -> Result<KktCertificate> {
    CoxLasso::new(design, outcome)?.weights(weights.clone())?.constraint(constraint).kkt_check(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::RealDesign;

    fn toy() -> (RealDesign, Vec<f64>, Vec<bool>) {
        let x1 = vec![0.5, -1.0, 1.2, 0.3, -0.7, 2.0, -0.2, 0.9, -1.5, 0.1];
        let x2 = vec![1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let times = vec![3.0, 8.0, 1.0, 5.0, 6.0, 0.5, 7.0, 2.0, 9.0, 4.0];
        let events = vec![true, true, true, false, true, true, false, true, true, true];
        (RealDesign::from_columns(10, &[x1, x2]), times, events)
    }

    #[test]
    fn zero_above_lambda_max() {
        let (x, t, e) = toy();
        let cl = CoxLasso::new(&x, Outcome::new(&t, &e).unwrap()).unwrap();
        let lmax = cl.lambda_max().unwrap();
        let f = cl.fit(1.01 * lmax, None).unwrap();
        assert!(f.beta.iter().all(|&b| b == 0.0));
        let f = cl.fit(0.5 * lmax, None).unwrap();
        assert!(f.beta.iter().any(|&b| b != 0.0));
        assert!(cl.kkt_check(&f).unwrap().passed);
    }

    #[test]
    fn nonnegative_never_negative() {
        let (x, t, e) = toy();
        let cl = CoxLasso::new(&x, Outcome::new(&t, &e).unwrap()).unwrap().constraint(Constraint::NonNegative);
        for lam in [0.0, 0.01, 0.05] {
            let f = cl.fit(lam, None).unwrap();
            assert!(f.beta.iter().all(|&b| b >= 0.0));
            assert!(cl.kkt_check(&f).unwrap().passed, "{lam} {f:?} {:?}", cl.kkt_check(&f));
        }
    }

    #[test]
    fn unpenalized_coordinate_enters_lambda_max() {
        let (x, t, e) = toy();
        let w = PenaltyWeights::new(vec![0.0, 1.0]).unwrap();
        let cl = CoxLasso::new(&x, Outcome::new(&t, &e).unwrap()).unwrap().weights(w).unwrap();
        let lmax = cl.lambda_max().unwrap();
        let f = cl.fit(lmax * 1.01, None).unwrap();
        assert_eq!(f.beta[1], 0.0);
        assert!(f.beta[0] != 0.0);
        assert!(cl.kkt_check(&f).unwrap().passed);
    }

    #[test]
    fn weight_validation() {
        assert!(matches!(PenaltyWeights::new(vec![0.0, 0.0]), Err(Error::AllWeightsZero)));
        assert!(PenaltyWeights::new(vec![-1.0, 1.0]).is_err());
    }
}
