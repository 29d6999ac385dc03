use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cox::RiskSets;
use crate::error::{Error, Result};

use super::path::{LassoPath, PathConfig};
use super::CoxLasso;

/// Which cross-validated lambda to use downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    #[default]
    Min,
    OneSe,
}

impl std::str::FromStr for LambdaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" | "lambda_min" => Ok(Self::Min),
            "1se" | "one_se" | "lambda_1se" => Ok(Self::OneSe),
            other => Err(Error::InvalidConfig(format!("unknown lambda rule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvConfig {
    pub n_folds: usize,
    pub seed: u64,
    pub path: PathConfig,
    /// Lambda used by pipelines that consume the cross-validation result.
    pub rule: LambdaRule,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { n_folds: 10, seed: 0, path: PathConfig::default(), rule: LambdaRule::Min }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub lambdas: Vec<f64>,
    pub mean_cv_deviance: Vec<f64>,
    /// Standard error of the fold deviances around their mean.
    pub sd: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_1se: f64,
    pub index_min: usize,
    pub index_1se: usize,
    pub fold_assignments: Vec<usize>,
    pub seed: u64,
    /// Full-data path over `lambdas`.
    pub path: LassoPath,
}

impl CvResult {
    pub fn selected_index(&self, rule: LambdaRule) -> usize {
        match rule {
            LambdaRule::Min => self.index_min,
            LambdaRule::OneSe => self.index_1se,
        }
    }

    pub fn selected_lambda(&self, rule: LambdaRule) -> f64 {
        self.lambdas[self.selected_index(rule)]
    }

    pub fn selected_fit(&self, rule: LambdaRule) -> &super::CoxFit {
        &self.path.fits[self.selected_index(rule)]
    }
}

/// Seeded fold labels in `0..k`: events and censored rows are shuffled separately and dealt
/// round-robin, so event counts per fold differ by at most one.
pub fn stratified_folds(events: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidConfig("at least two folds are required".into()));
    }
    if k > events.len() {
        return Err(Error::InvalidConfig(format!("{k} folds for {} rows", events.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ev: Vec<usize> = (0..events.len()).filter(|&i| events[i]).collect();
    let mut cens: Vec<usize> = (0..events.len()).filter(|&i| !events[i]).collect();
    ev.shuffle(&mut rng);
    cens.shuffle(&mut rng);
    let mut folds = vec![0; events.len()];
    for (i, &r) in ev.iter().chain(&cens).enumerate() {
        folds[r] = i % k;
    }
    if ev.len() < k {
        return Err(Error::FoldWithoutEvents(ev.len()));
    }
    Ok(folds)
}

impl CoxLasso<'_> {
    /// K-fold cross-validated partial-likelihood deviance over the full-data lambda path.
    pub fn cross_validate(&self, config: &CvConfig) -> Result<CvResult> {
        let folds = stratified_folds(self.outcome.events, config.n_folds, config.seed)?;
        self.cross_validate_with_folds(config, &folds)
    }

    pub fn cross_validate_with_folds(&self, config: &CvConfig, folds: &[usize]) -> Result<CvResult> {
        let n = self.outcome.len();
        if folds.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: folds.len() });
        }
        let k = folds.iter().max().map_or(0, |m| m + 1);
        if k < 2 {
            return Err(Error::InvalidConfig("at least two folds are required".into()));
        }
        for f in 0..k {
            if !(0..n).any(|i| folds[i] == f && self.outcome.events[i]) {
                return Err(Error::FoldWithoutEvents(f));
            }
        }
        let lambdas = self.path_lambdas(&config.path)?;
        let full_risk = RiskSets::new(self.outcome)?;

        let per_fold: Vec<Result<Vec<f64>>> = (0..k)
            .into_par_iter()
            .map(|f| {
                let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
                let train_risk = RiskSets::subset(self.outcome, &train)?;
                let mut engine = self.engine(Some(&train))?;
                if self.weights.as_slice().contains(&0.0) {
                    engine.solve_unpenalized_only();
                }
                let mut dev = Vec::with_capacity(lambdas.len());
                for &lambda in &lambdas {
                    engine.solve(lambda);
                    let lp = self.design.linear_predictor(&engine.beta);
                    // log-partial likelihoods on the unscaled scale
                    let l_full = -(n as f64) * full_risk.nll(&lp);
                    let l_train = -(train.len() as f64) * train_risk.nll(&lp);
                    dev.push(-2.0 * (l_full - l_train));
                }
                Ok(dev)
            })
            .collect();
        let per_fold: Vec<Vec<f64>> = per_fold.into_iter().collect::<Result<_>>()?;

        let m = lambdas.len();
        let kf = k as f64;
        let mut mean = vec![0.0; m];
        let mut sd = vec![0.0; m];
        for j in 0..m {
            let mu = per_fold.iter().map(|d| d[j]).sum::<f64>() / kf;
            let var = per_fold.iter().map(|d| (d[j] - mu).powi(2)).sum::<f64>() / kf;
            mean[j] = mu;
            sd[j] = (var / (kf - 1.0)).sqrt();
        }
        let index_min = (0..m).fold(0, |best, j| if mean[j] < mean[best] { j } else { best });
        let bound = mean[index_min] + sd[index_min];
        let index_1se = (0..=index_min).find(|&j| mean[j] <= bound).unwrap_or(index_min);

        let path = self.fit_path_at(&lambdas)?;
        Ok(CvResult {
            lambda_min: lambdas[index_min],
            lambda_1se: lambdas[index_1se],
            lambdas,
            mean_cv_deviance: mean,
            sd,
            index_min,
            index_1se,
            fold_assignments: folds.to_vec(),
            seed: config.seed,
            path,
        })
    }
}
