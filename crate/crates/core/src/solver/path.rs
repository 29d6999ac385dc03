use serde::Serialize;

use crate::error::{Error, Result};

use super::{CoxFit, CoxLasso};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
    pub n_lambdas: usize,
    /// Smallest lambda as a fraction of lambda_max; `None` picks 1e-2 when n > d, else 5e-2.
    pub lambda_ratio: Option<f64>,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self { n_lambdas: 100, lambda_ratio: None }
    }
}

impl PathConfig {
    pub fn ratio_for(&self, n: usize, d: usize) -> f64 {
        self.lambda_ratio.unwrap_or(if n > d { 1e-2 } else { 5e-2 })
    }
}

/// Fits along a decreasing lambda sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LassoPath {
    pub lambdas: Vec<f64>,
    pub fits: Vec<CoxFit>,
    /// Largest path lambda at which each coordinate is nonzero.
    pub entry_lambda: Vec<Option<f64>>,
}

impl LassoPath {
    pub(crate) fn from_fits(fits: Vec<CoxFit>, d: usize) -> Self {
        let mut entry_lambda = vec![None; d];
        for f in &fits {
            for &k in &f.active_set {
                if entry_lambda[k].is_none() {
                    entry_lambda[k] = Some(f.lambda);
                }
            }
        }
        Self { lambdas: fits.iter().map(|f| f.lambda).collect(), fits, entry_lambda }
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Index of the path lambda closest to `lambda` on the log scale.
    pub fn nearest(&self, lambda: f64) -> usize {
        let target = lambda.max(f64::MIN_POSITIVE).ln();
        (0..self.lambdas.len())
            .min_by(|&a, &b| {
                let da = (self.lambdas[a].ln() - target).abs();
                let db = (self.lambdas[b].ln() - target).abs();
                da.total_cmp(&db)
            })
            .unwrap_or(0)
    }
}

/// Log-spaced lambdas from `lambda_max` down to `ratio * lambda_max`.
pub fn lambda_sequence(lambda_max: f64, n_lambdas: usize, ratio: f64) -> Vec<f64> {
    let (hi, lo) = (lambda_max.ln(), (lambda_max * ratio).ln());
    (0..n_lambdas)
        .map(|k| {
            if k == 0 {
                lambda_max
            } else {
                (hi + (lo - hi) * k as f64 / (n_lambdas - 1) as f64).exp()
            }
        })
        .collect()
}

impl CoxLasso<'_> {
    pub(crate) fn path_lambdas(&self, config: &PathConfig) -> Result<Vec<f64>> {
        if config.n_lambdas < 2 {
            return Err(Error::InvalidConfig("n_lambdas must be at least 2".into()));
        }
        let ratio = config.ratio_for(self.design.n_rows(), self.design.n_cols());
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidConfig(format!("lambda_ratio must lie in (0, 1), got {ratio}")));
        }
        Ok(lambda_sequence(self.lambda_max()?, config.n_lambdas, ratio))
    }

    /// Warm-started path from lambda_max downwards.
    pub fn fit_path(&self, config: &PathConfig) -> Result<LassoPath> {
        let lambdas = self.path_lambdas(config)?;
        self.fit_path_at(&lambdas)
    }

    /// Warm-started path over an explicit strictly decreasing lambda sequence.
    pub fn fit_path_at(&self, lambdas: &[f64]) -> Result<LassoPath> {
        if lambdas.windows(2).any(|w| !(w[1] < w[0])) || lambdas.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::InvalidConfig("path lambdas must be nonnegative and strictly decreasing".into()));
        }
        let mut engine = self.engine(None)?;
        if self.penalty_weights().as_slice().contains(&0.0) {
            engine.solve_unpenalized_only();
        }
        let mut fits = Vec::with_capacity(lambdas.len());
        for &lambda in lambdas {
            let out = engine.solve(lambda);
            if !out.converged {
                log::warn!("coordinate descent hit the cycle cap at lambda {lambda}");
            }
            fits.push(self.snapshot(&mut engine, lambda, out.cycles, out.converged));
        }
        Ok(LassoPath::from_fits(fits, self.design.n_cols()))
    }
}
