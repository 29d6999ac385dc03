//! End-to-end estimators: biniLasso, miniLasso, the limited cut-point procedures, univariate
//! screening and categorized refits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binarize::{
    build_cut_grid, cumulative_binarize, cumulative_binarize_with_boundary, design_rank_check, ColumnMeta,
    CumulativeDesign, CutGrid, DroppedFeature, FeatureGrid, GridStrategy,
};
use crate::cox::{breslow_from_lp, fit_univariate, BaselineHazard, RiskSets};
use crate::data::SurvivalDataset;
use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::metrics::{aic, c_index, default_time_grid, ibs, EvaluationBundle};
use crate::solver::{CoxFit, CoxLasso, CvConfig, LambdaRule, LassoPath, PathConfig, PenaltyWeights};
use crate::unilasso::{fit_minilasso, MiniLassoConfig, MiniLassoFit};

/// How candidate thresholds are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub bins: usize,
    pub strategy: GridStrategy,
    /// Adds an unpenalized `1{x > min}` column per feature.
    pub boundary_indicators: bool,
    /// Thresholds keyed by feature name, used by the explicit strategy.
    pub thresholds: Vec<(String, Vec<f64>)>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { bins: 50, strategy: GridStrategy::Quantile, boundary_indicators: false, thresholds: Vec::new() }
    }
}

impl GridConfig {
    pub fn build(&self, ds: &SurvivalDataset) -> Result<CutGrid> {
        if self.strategy != GridStrategy::Explicit {
            return build_cut_grid(ds, self.bins, self.strategy);
        }
        let mut per_feature = Vec::with_capacity(self.thresholds.len());
        for (name, th) in &self.thresholds {
            let j = ds.feature_index(name).ok_or_else(|| Error::GridMismatch(format!("unknown feature `{name}`")))?;
            per_feature.push((j, th.clone()));
        }
        CutGrid::explicit(ds, per_feature)
    }

    pub fn design(&self, ds: &SurvivalDataset, grid: &CutGrid) -> Result<CumulativeDesign> {
        if self.boundary_indicators {
            cumulative_binarize_with_boundary(ds, grid)
        } else {
            cumulative_binarize(ds, grid)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportMethod {
    Bini,
    Mini,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    Full,
    LimitedOneStep,
    LimitedTwoStep,
}

/// Selected thresholds of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCuts {
    pub name: String,
    pub thresholds: Vec<f64>,
    /// Log-hazard jump at each threshold.
    pub effects: Vec<f64>,
}

/// The grid a report was selected from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridProvenance {
    pub strategy: GridStrategy,
    pub bins: usize,
    pub boundary_indicators: bool,
    pub features: Vec<FeatureGrid>,
    pub dropped: Vec<DroppedFeature>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvProvenance {
    pub n_folds: usize,
    pub seed: u64,
    pub rule: LambdaRule,
}

/// Estimated cut-points with their effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutpointReport {
    pub method: ReportMethod,
    pub procedure: Procedure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_cuts: Option<usize>,
    pub lambda: f64,
    pub features: Vec<FeatureCuts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvProvenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridProvenance>,
    /// Whether the fit behind the report met its convergence criterion.
    #[serde(default = "yes")]
    pub converged: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

fn yes() -> bool {
    true
}

impl CutpointReport {
    pub fn n_cutpoints(&self) -> usize {
        self.features.iter().map(|f| f.thresholds.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.n_cutpoints() == 0
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureCuts> {
        self.features.iter().find(|f| f.name == name)
    }

    /// `(feature name, thresholds)` pairs, the form taken by [`crate::metrics::cutpoint_accuracy`].
    pub fn named_thresholds(&self) -> Vec<(String, Vec<f64>)> {
        self.features.iter().map(|f| (f.name.clone(), f.thresholds.clone())).collect()
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

struct ReportContext<'a> {
    method: ReportMethod,
    procedure: Procedure,
    max_cuts: Option<usize>,
    cv: Option<&'a CvConfig>,
    grid_cfg: &'a GridConfig,
    grid: &'a CutGrid,
    warnings: Vec<String>,
    converged: bool,
}

impl ReportContext<'_> {
    /// Groups the nonzero non-boundary effects of `meta` by feature.
    fn report(self, ds: &SurvivalDataset, meta: &[ColumnMeta], effects: &[f64], lambda: f64) -> CutpointReport {
        let mut features: Vec<FeatureCuts> = Vec::new();
        for (m, &e) in meta.iter().zip(effects) {
            if m.boundary || e == 0.0 {
                continue;
            }
            let name = &ds.feature_names()[m.feature];
            match features.last_mut() {
                Some(f) if &f.name == name => {
                    f.thresholds.push(m.threshold);
                    f.effects.push(e);
                }
                _ => features.push(FeatureCuts { name: name.clone(), thresholds: vec![m.threshold], effects: vec![e] }),
            }
        }
        CutpointReport {
            method: self.method,
            procedure: self.procedure,
            max_cuts: self.max_cuts,
            lambda,
            features,
            cv: self.cv.map(|c| CvProvenance { n_folds: c.n_folds, seed: c.seed, rule: c.rule }),
            grid: Some(GridProvenance {
                strategy: self.grid.strategy,
                bins: self.grid_cfg.bins,
                boundary_indicators: self.grid_cfg.boundary_indicators,
                features: self.grid.features.clone(),
                dropped: self.grid.dropped.clone(),
            }),
            converged: self.converged,
            warnings: self.warnings,
        }
    }
}

fn prepare(ds: &SurvivalDataset, grid_cfg: &GridConfig) -> Result<(CutGrid, CumulativeDesign, Vec<String>)> {
    let grid = grid_cfg.build(ds)?;
    let warnings: Vec<String> =
        grid.dropped.iter().map(|d| format!("feature `{}` dropped: {}", d.name, d.reason)).collect();
    let design = grid_cfg.design(ds, &grid)?;
    if design.column_meta().iter().all(|m| m.boundary) {
        return Err(Error::InvalidGrid("no candidate thresholds".into()));
    }
    Ok((grid, design, warnings))
}

/// biniLasso: weighted lasso Cox over the cumulative design, lambda chosen by cross-validation.
pub fn fit_binilasso(ds: &SurvivalDataset, grid_cfg: &GridConfig, cv: &CvConfig) -> Result<(CutpointReport, CoxFit)> {
    let (grid, design, warnings) = prepare(ds, grid_cfg)?;
    let weights = PenaltyWeights::with_exempt(design.n_cols(), design.penalty_exempt())?;
    let problem = CoxLasso::new(&design, ds.outcome())?.weights(weights)?;
    let result = problem.cross_validate(cv)?;
    let fit = result.selected_fit(cv.rule).clone();
    if !fit.converged {
        log::warn!("biniLasso fit at lambda {} did not converge", fit.lambda);
    }
    let ctx = ReportContext {
        method: ReportMethod::Bini,
        procedure: Procedure::Full,
        max_cuts: None,
        cv: Some(cv),
        grid_cfg,
        grid: &grid,
        warnings,
        converged: fit.converged,
    };
    let report = ctx.report(ds, design.column_meta(), &fit.beta, fit.lambda);
    Ok((report, fit))
}

/// miniLasso; reported effects are the composite effects `theta_k * slope_k`.
pub fn fit_minilasso_pipeline(
    ds: &SurvivalDataset,
    grid_cfg: &GridConfig,
    config: &MiniLassoConfig,
) -> Result<(CutpointReport, MiniLassoFit)> {
    let (grid, design, mut warnings) = prepare(ds, grid_cfg)?;
    let fit = fit_minilasso(&design, ds.outcome(), None, config)?;
    let n_degenerate = fit.univariate.degenerate.iter().filter(|&&d| d).count();
    if n_degenerate > 0 {
        warnings.push(format!("{n_degenerate} indicator columns have no finite univariate fit"));
    }
    let ctx = ReportContext {
        method: ReportMethod::Mini,
        procedure: Procedure::Full,
        max_cuts: None,
        cv: Some(&config.cv),
        grid_cfg,
        grid: &grid,
        warnings,
        converged: fit.cv.selected_fit(config.cv.rule).converged,
    };
    let report = ctx.report(ds, design.column_meta(), &fit.composite_effects, fit.lambda);
    Ok((report, fit))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMode {
    OneStep,
    TwoStep,
}

impl std::str::FromStr for LimitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-step" | "one_step" => Ok(Self::OneStep),
            "two-step" | "two_step" => Ok(Self::TwoStep),
            other => Err(Error::InvalidConfig(format!("unknown mode '{other}'"))),
        }
    }
}

/// How the most influential columns of a feature are ranked along a lasso path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingRule {
    /// Earliest entry scanning lambda downward; ties by larger max |coef|, then lower threshold.
    #[default]
    EntryOrder,
    /// Largest max |coef| along the path; ties by entry order, then lower threshold.
    MaxAbsCoef,
}

impl std::str::FromStr for RankingRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entry-order" | "entry_order" => Ok(Self::EntryOrder),
            "max-abs-coef" | "max_abs_coef" => Ok(Self::MaxAbsCoef),
            other => Err(Error::InvalidConfig(format!("unknown ranking rule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitedCutConfig {
    pub m: usize,
    pub mode: LimitMode,
    #[serde(default)]
    pub ranking_rule: RankingRule,
}

impl LimitedCutConfig {
    pub fn new(m: usize, mode: LimitMode) -> Result<Self> {
        let cfg = Self { m, mode, ranking_rule: RankingRule::EntryOrder };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidConfig("max cut-points per feature must be at least 1".into()));
        }
        Ok(())
    }
}

/// Orders `cols` (indices into the path's coefficient vectors) by `rule`, most influential first.
/// Columns that never enter sort after all entrants.
pub fn rank_columns(path: &LassoPath, cols: &[usize], meta: &[ColumnMeta], rule: RankingRule) -> Vec<usize> {
    let max_abs = |k: usize| path.fits.iter().map(|f| f.beta[k].abs()).fold(0.0, f64::max);
    let entry = |k: usize| path.entry_lambda[k].unwrap_or(f64::NEG_INFINITY);
    let mut keyed: Vec<(usize, f64, f64)> = cols.iter().map(|&k| (k, entry(k), max_abs(k))).collect();
    keyed.sort_by(|a, b| {
        let (ea, eb) = (b.1.total_cmp(&a.1), b.2.total_cmp(&a.2));
        let primary = match rule {
            RankingRule::EntryOrder => ea.then(eb),
            RankingRule::MaxAbsCoef => eb.then(ea),
        };
        primary.then(meta[a.0].threshold_index.cmp(&meta[b.0].threshold_index))
    });
    keyed.into_iter().map(|(k, _, _)| k).collect()
}

/// Two-step limited procedure: per-feature paths rank each feature's columns and keep the top
/// `m`; one cross-validated lasso over the kept columns gives the report.
pub fn limited_two_step(
    ds: &SurvivalDataset,
    cfg: &LimitedCutConfig,
    grid_cfg: &GridConfig,
    cv: &CvConfig,
) -> Result<CutpointReport> {
    let (grid, sub, warnings) = two_step_retained(ds, cfg, grid_cfg, &cv.path)?;
    let weights = PenaltyWeights::with_exempt(sub.n_cols(), sub.penalty_exempt())?;
    let result = CoxLasso::new(&sub, ds.outcome())?.weights(weights)?.cross_validate(cv)?;
    let fit = result.selected_fit(cv.rule);
    let ctx = ReportContext {
        method: ReportMethod::Bini,
        procedure: Procedure::LimitedTwoStep,
        max_cuts: Some(cfg.m),
        cv: Some(cv),
        grid_cfg,
        grid: &grid,
        warnings,
        converged: fit.converged,
    };
    Ok(ctx.report(ds, sub.column_meta(), &fit.beta, fit.lambda))
}

/// As [`limited_two_step`] with miniLasso as the second step; effects are composite effects.
pub fn limited_two_step_mini(
    ds: &SurvivalDataset,
    cfg: &LimitedCutConfig,
    grid_cfg: &GridConfig,
    config: &MiniLassoConfig,
) -> Result<CutpointReport> {
    let (grid, sub, warnings) = two_step_retained(ds, cfg, grid_cfg, &config.cv.path)?;
    let fit = fit_minilasso(&sub, ds.outcome(), None, config)?;
    let ctx = ReportContext {
        method: ReportMethod::Mini,
        procedure: Procedure::LimitedTwoStep,
        max_cuts: Some(cfg.m),
        cv: Some(&config.cv),
        grid_cfg,
        grid: &grid,
        warnings,
        converged: fit.cv.selected_fit(config.cv.rule).converged,
    };
    Ok(ctx.report(ds, sub.column_meta(), &fit.composite_effects, fit.lambda))
}

fn two_step_retained(
    ds: &SurvivalDataset,
    cfg: &LimitedCutConfig,
    grid_cfg: &GridConfig,
    path_cfg: &PathConfig,
) -> Result<(CutGrid, CumulativeDesign, Vec<String>)> {
    cfg.validate()?;
    if cfg.mode != LimitMode::TwoStep {
        return Err(Error::InvalidConfig("two-step selection needs mode two_step".into()));
    }
    let (grid, design, warnings) = prepare(ds, grid_cfg)?;
    let kept = step_one_ranking(ds, &design, cfg, path_cfg)?;
    let mut retained: Vec<usize> = kept.into_iter().flat_map(|(_, cols)| cols).collect();
    retained.extend(design.penalty_exempt());
    retained.sort_unstable();
    Ok((grid, design.select_columns(&retained), warnings))
}

/// Step one of the two-step procedure: per feature, its top `m` candidate columns (indices
/// into `design`) from an independent lasso path over that feature's columns.
pub fn step_one_ranking(
    ds: &SurvivalDataset,
    design: &CumulativeDesign,
    cfg: &LimitedCutConfig,
    path_cfg: &PathConfig,
) -> Result<Vec<(usize, Vec<usize>)>> {
    let meta = design.column_meta();
    design
        .features()
        .into_par_iter()
        .map(|j| {
            let cols = design.columns_of_feature(j);
            let candidates: Vec<usize> = cols.iter().copied().filter(|&k| !meta[k].boundary).collect();
            if candidates.len() <= cfg.m {
                return Ok((j, candidates));
            }
            let sub = design.select_columns(&cols);
            let weights = PenaltyWeights::with_exempt(sub.n_cols(), sub.penalty_exempt())?;
            let path = CoxLasso::new(&sub, ds.outcome())?.weights(weights)?.fit_path(path_cfg)?;
            let local: Vec<usize> = (0..cols.len()).filter(|&l| !meta[cols[l]].boundary).collect();
            let ranked = rank_columns(&path, &local, sub.column_meta(), cfg.ranking_rule);
            let mut top: Vec<usize> = ranked.into_iter().take(cfg.m).map(|l| cols[l]).collect();
            top.sort_unstable();
            Ok((j, top))
        })
        .collect()
}

/// One-step limited procedure: a single path over all columns; per feature, the top `m` of the
/// columns that ever enter. Effects come from an unpenalized Cox refit on the chosen columns.
pub fn limited_one_step(
    ds: &SurvivalDataset,
    cfg: &LimitedCutConfig,
    grid_cfg: &GridConfig,
    path_cfg: &PathConfig,
) -> Result<CutpointReport> {
    cfg.validate()?;
    if cfg.mode != LimitMode::OneStep {
        return Err(Error::InvalidConfig("limited_one_step needs mode one_step".into()));
    }
    let (grid, design, mut warnings) = prepare(ds, grid_cfg)?;
    let features = design.features();
    if features.len() > 2 {
        let msg = format!("one-step limited selection is meant for one or two features, got {}", features.len());
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let weights = PenaltyWeights::with_exempt(design.n_cols(), design.penalty_exempt())?;
    let path = CoxLasso::new(&design, ds.outcome())?.weights(weights)?.fit_path(path_cfg)?;
    let meta = design.column_meta();
    let mut chosen: Vec<usize> = design.penalty_exempt().to_vec();
    for j in features {
        let entered: Vec<usize> = design
            .columns_of_feature(j)
            .into_iter()
            .filter(|&k| !meta[k].boundary && path.entry_lambda[k].is_some())
            .collect();
        chosen.extend(rank_columns(&path, &entered, meta, cfg.ranking_rule).into_iter().take(cfg.m));
    }
    chosen.sort_unstable();
    let mut ctx = ReportContext {
        method: ReportMethod::Bini,
        procedure: Procedure::LimitedOneStep,
        max_cuts: Some(cfg.m),
        cv: None,
        grid_cfg,
        grid: &grid,
        warnings,
        converged: path.fits.iter().all(|f| f.converged),
    };
    if chosen.iter().all(|&k| meta[k].boundary) {
        return Ok(ctx.report(ds, &[], &[], 0.0));
    }
    let sub = design.select_columns(&chosen);
    let fit = CoxLasso::new(&sub, ds.outcome())?.fit(0.0, None)?;
    if !fit.converged {
        log::warn!("unpenalized refit of the one-step selection did not converge");
        ctx.converged = false;
    }
    Ok(ctx.report(ds, sub.column_meta(), &fit.beta, 0.0))
}

/// One row of the screening table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreenRow {
    pub feature: usize,
    pub name: String,
    pub coefficient: f64,
    pub aic: Option<f64>,
    pub ibs: Option<f64>,
    /// 1-based ranks; `None` for degenerate features.
    pub rank_aic: Option<usize>,
    pub rank_ibs: Option<usize>,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeningResult {
    pub top_k: usize,
    /// One row per feature, in dataset order.
    pub table: Vec<ScreenRow>,
    /// Selected feature names ordered by best rank, then name.
    pub selected: Vec<String>,
}

impl ScreeningResult {
    pub const CSV_HEADER: &'static str = "feature,coefficient,aic,ibs,rank_aic,rank_ibs,selected";

    pub fn csv_rows(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let opt_u = |v: Option<usize>| v.map_or(String::new(), |x| x.to_string());
        self.table
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{},{},{}",
                    r.name,
                    r.coefficient,
                    opt(r.aic),
                    opt(r.ibs),
                    opt_u(r.rank_aic),
                    opt_u(r.rank_ibs),
                    r.selected as u8
                )
            })
            .collect()
    }
}

/// Univariate continuous Cox screening: union of the `top_k` features by AIC and by in-sample
/// IBS, ties broken by feature name.
pub fn screen_features(ds: &SurvivalDataset, top_k: usize) -> Result<ScreeningResult> {
    if top_k == 0 {
        return Err(Error::InvalidConfig("top_k must be at least 1".into()));
    }
    let outcome = ds.outcome();
    let risk = RiskSets::new(outcome)?;
    let grid = default_time_grid(outcome)?;
    let mut table: Vec<ScreenRow> = (0..ds.n_features())
        .into_par_iter()
        .map(|j| {
            let x = ds.feature(j).to_vec();
            let u = fit_univariate(&risk, &x, 0.0, 100, 1e-10);
            let name = ds.feature_names()[j].clone();
            let mut row = ScreenRow {
                feature: j,
                name,
                coefficient: u.beta,
                aic: None,
                ibs: None,
                rank_aic: None,
                rank_ibs: None,
                selected: false,
            };
            if u.degenerate || !u.converged {
                return row;
            }
            let lp: Vec<f64> = x.iter().map(|v| u.beta * v).collect();
            let bh = breslow_from_lp(&risk, &lp);
            row.aic = Some(2.0 - 2.0 * u.log_pl);
            row.ibs = ibs(&bh, &lp, outcome, outcome, &grid).ok();
            row
        })
        .collect();

    let rank_by = |table: &[ScreenRow], key: &dyn Fn(&ScreenRow) -> Option<f64>| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..table.len()).filter(|&i| key(&table[i]).is_some()).collect();
        idx.sort_by(|&a, &b| {
            key(&table[a]).unwrap().total_cmp(&key(&table[b]).unwrap()).then(table[a].name.cmp(&table[b].name))
        });
        idx
    };
    let by_aic = rank_by(&table, &|r| r.aic);
    let by_ibs = rank_by(&table, &|r| r.ibs);
    for (r, &i) in by_aic.iter().enumerate() {
        table[i].rank_aic = Some(r + 1);
    }
    for (r, &i) in by_ibs.iter().enumerate() {
        table[i].rank_ibs = Some(r + 1);
    }
    for &i in by_aic.iter().take(top_k).chain(by_ibs.iter().take(top_k)) {
        table[i].selected = true;
    }
    let mut chosen: Vec<&ScreenRow> = table.iter().filter(|r| r.selected).collect();
    let best = |r: &ScreenRow| r.rank_aic.unwrap_or(usize::MAX).min(r.rank_ibs.unwrap_or(usize::MAX));
    chosen.sort_by(|a, b| best(a).cmp(&best(b)).then(a.name.cmp(&b.name)));
    let selected = chosen.into_iter().map(|r| r.name.clone()).collect();
    Ok(ScreeningResult { top_k, table, selected })
}

/// Unpenalized Cox fit on the categorized predictors of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategorizedRefit {
    pub fit: CoxFit,
    /// `(feature name, threshold)` of each coefficient.
    pub columns: Vec<(String, f64)>,
    #[serde(skip)]
    pub baseline: BaselineHazard,
    pub evaluation: EvaluationBundle,
}

/// AIC on the training fit, IBS and C-index on `test`, censoring weights from `train`.
pub fn evaluate_fit(
    design_train: &dyn DesignMatrix,
    fit: &CoxFit,
    train: &SurvivalDataset,
    test: Option<(&dyn DesignMatrix, &SurvivalDataset)>,
    n_cutpoints: usize,
) -> Result<(EvaluationBundle, BaselineHazard)> {
    let risk = RiskSets::new(train.outcome())?;
    let lp_train = design_train.linear_predictor(&fit.beta);
    let baseline = breslow_from_lp(&risk, &lp_train);
    let (lp_test, test_ds) = match test {
        Some((d, ds)) => (d.linear_predictor(&fit.beta), ds),
        None => (lp_train, train),
    };
    let grid = default_time_grid(train.outcome())?;
    let bundle = EvaluationBundle {
        aic: aic(fit)?,
        ibs: ibs(&baseline, &lp_test, test_ds.outcome(), train.outcome(), &grid)?,
        c_index: c_index(&lp_test, test_ds.outcome())?,
        n_cutpoints,
        wall_time_seconds: None,
    };
    Ok((bundle, baseline))
}

fn report_grid(ds: &SurvivalDataset, report: &CutpointReport) -> Result<CutGrid> {
    if report.is_empty() {
        return Err(Error::EmptyReport);
    }
    let mut per_feature = Vec::new();
    for f in &report.features {
        let j = ds.feature_index(&f.name).ok_or_else(|| Error::MissingColumn(f.name.clone()))?;
        let mut th = f.thresholds.clone();
        if th.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite threshold for `{}`", f.name)));
        }
        th.sort_by(f64::total_cmp);
        if let Some(w) = th.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::SingularRefit(format!("threshold {} of `{}` listed twice", w[0], f.name)));
        }
        if per_feature.iter().any(|(k, _)| *k == j) {
            return Err(Error::SingularRefit(format!("feature `{}` listed twice", f.name)));
        }
        per_feature.push((j, th));
    }
    CutGrid::explicit(ds, per_feature)
}

fn check_refit_design(ds: &SurvivalDataset, design: &CumulativeDesign) -> Result<()> {
    let label = |k: usize| {
        let m = design.column_meta()[k];
        format!("`{}` > {}", ds.feature_names()[m.feature], m.threshold)
    };
    for k in 0..design.n_cols() {
        let nnz = design.rows_of(k).len();
        if nnz == 0 || nnz == design.n_rows() {
            return Err(Error::SingularRefit(format!("indicator {} is constant", label(k))));
        }
    }
    let rank = design_rank_check(design);
    if let Some(&(a, b)) = rank.duplicated.first() {
        return Err(Error::SingularRefit(format!("indicators {} and {} coincide", label(a), label(b))));
    }
    if !rank.is_full_rank() {
        return Err(Error::SingularRefit(format!("design rank {} < {} columns", rank.rank, rank.n_cols)));
    }
    Ok(())
}

/// Refits an unpenalized Cox model at exactly the reported thresholds and evaluates it in sample.
pub fn refit_categorized(ds: &SurvivalDataset, report: &CutpointReport) -> Result<CategorizedRefit> {
    refit_categorized_holdout(ds, None, report)
}

/// As [`refit_categorized`], with IBS and C-index computed on `test` when given.
pub fn refit_categorized_holdout(
    train: &SurvivalDataset,
    test: Option<&SurvivalDataset>,
    report: &CutpointReport,
) -> Result<CategorizedRefit> {
    let grid = report_grid(train, report)?;
    let design = cumulative_binarize(train, &grid)?;
    check_refit_design(train, &design)?;
    let fit = CoxLasso::new(&design, train.outcome())?.fit(0.0, None)?;
    if !fit.converged {
        log::warn!("categorized refit did not converge");
    }
    let test_design = match test {
        Some(t) => Some(cumulative_binarize(t, &report_grid(t, report)?)?),
        None => None,
    };
    let test_pair = test_design.as_ref().zip(test).map(|(d, t)| (d as &dyn DesignMatrix, t));
    let (evaluation, baseline) = evaluate_fit(&design, &fit, train, test_pair, design.n_cols())?;
    let columns = design
        .column_meta()
        .iter()
        .map(|m| (train.feature_names()[m.feature].clone(), m.threshold))
        .collect();
    Ok(CategorizedRefit { fit, columns, baseline, evaluation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{simulate, ScenarioConfig};

    #[test]
    fn report_round_trips_through_json() {
        let sim = simulate(&ScenarioConfig::for_scenario(1, 300, 2)).unwrap();
        let cv = CvConfig { n_folds: 5, seed: 2, ..Default::default() };
        let grid = GridConfig { bins: 10, ..Default::default() };
        let (report, fit) = fit_binilasso(&sim.data, &grid, &cv).unwrap();
        assert_eq!(report.n_cutpoints(), fit.n_active());
        let back = CutpointReport::from_json(&report.to_json_pretty().unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn duplicated_threshold_is_singular() {
        let sim = simulate(&ScenarioConfig::for_scenario(1, 100, 2)).unwrap();
        let report = CutpointReport {
            method: ReportMethod::Bini,
            procedure: Procedure::Full,
            max_cuts: None,
            lambda: 0.0,
            features: vec![FeatureCuts { name: "x1".into(), thresholds: vec![0.5, 0.5], effects: vec![1.0, 1.0] }],
            cv: None,
            grid: None,
            converged: true,
            warnings: Vec::new(),
        };
        assert!(matches!(refit_categorized(&sim.data, &report), Err(Error::SingularRefit(_))));
        let empty = CutpointReport { features: Vec::new(), ..report };
        assert!(matches!(refit_categorized(&sim.data, &empty), Err(Error::EmptyReport)));
    }

    #[test]
    fn limited_cap_holds() {
        let sim = simulate(&ScenarioConfig::for_scenario(4, 400, 5)).unwrap();
        let grid = GridConfig { bins: 20, ..Default::default() };
        let cv = CvConfig { n_folds: 5, seed: 5, ..Default::default() };
        let cfg = LimitedCutConfig::new(2, LimitMode::TwoStep).unwrap();
        let report = limited_two_step(&sim.data, &cfg, &grid, &cv).unwrap();
        assert!(report.features.iter().all(|f| f.thresholds.len() <= 2));
        let one = LimitedCutConfig::new(1, LimitMode::OneStep).unwrap();
        let report = limited_one_step(&sim.data, &one, &grid, &PathConfig::default()).unwrap();
        assert!(report.features.iter().all(|f| f.thresholds.len() <= 1));
    }
}
