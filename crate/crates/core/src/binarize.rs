//! Candidate cut-point grids and the cumulative binarized design.
//!
//! Feature `j` with thresholds `mu_1 < ... < mu_d` is encoded as the nested indicators
//! `1{x > mu_l}`. Columns are ordered feature-major, then by ascending threshold.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::data::SurvivalDataset;
use crate::design::{ColumnRef, DesignMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GridStrategy {
    #[default]
    Quantile,
    Uniform,
    Explicit,
}

impl std::str::FromStr for GridStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantile" => Ok(Self::Quantile),
            "uniform" => Ok(Self::Uniform),
            "explicit" => Ok(Self::Explicit),
            other => Err(Error::InvalidConfig(format!("unknown grid strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGrid {
    pub feature: usize,
    pub name: String,
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedFeature {
    pub feature: usize,
    pub name: String,
    pub reason: String,
}

/// Per-feature strictly increasing candidate thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct CutGrid {
    pub strategy: GridStrategy,
    pub features: Vec<FeatureGrid>,
    /// Features without any usable threshold (fewer than two distinct values).
    pub dropped: Vec<DroppedFeature>,
}

impl CutGrid {
    /// Total number of thresholds, `d = sum_j d_j`.
    pub fn n_thresholds(&self) -> usize {
        self.features.iter().map(|f| f.thresholds.len()).sum()
    }

    pub fn get(&self, feature: usize) -> Option<&FeatureGrid> {
        self.features.iter().find(|f| f.feature == feature)
    }

    /// `{feature_name: [thresholds...]}` in grid order.
    pub fn to_json(&self) -> Value {
        let mut map = Map::new();
        for f in &self.features {
            map.insert(f.name.clone(), Value::from(f.thresholds.clone()));
        }
        Value::Object(map)
    }

    /// Explicit grid from the `{feature_name: [thresholds...]}` form.
    pub fn from_json(value: &Value, ds: &SurvivalDataset) -> Result<Self> {
        let map = value
            .as_object()
            .ok_or_else(|| Error::InvalidGrid("expected a JSON object".into()))?;
        let mut per_feature = Vec::with_capacity(map.len());
        for (name, list) in map {
            let j = ds
                .feature_index(name)
                .ok_or_else(|| Error::GridMismatch(format!("unknown feature `{name}`")))?;
            let thresholds = list
                .as_array()
                .ok_or_else(|| Error::InvalidGrid(format!("`{name}` is not an array")))?
                .iter()
                .map(|v| {
                    v.as_f64()
                        .ok_or_else(|| Error::InvalidGrid(format!("non-numeric threshold for `{name}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            per_feature.push((j, thresholds));
        }
        Self::explicit(ds, per_feature)
    }

    /// Grid from user-supplied thresholds; thresholds must be finite and strictly increasing.
    pub fn explicit(ds: &SurvivalDataset, thresholds: Vec<(usize, Vec<f64>)>) -> Result<Self> {
        let mut features = Vec::with_capacity(thresholds.len());
        for (j, th) in thresholds {
            if j >= ds.n_features() {
                return Err(Error::GridMismatch(format!("feature index {j} out of range")));
            }
            if th.iter().any(|v| !v.is_finite()) || th.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidGrid(format!(
                    "thresholds for `{}` must be finite and strictly increasing",
                    ds.feature_names()[j]
                )));
            }
            if th.is_empty() {
                continue;
            }
            features.push(FeatureGrid { feature: j, name: ds.feature_names()[j].clone(), thresholds: th });
        }
        features.sort_by_key(|f| f.feature);
        if features.windows(2).any(|w| w[0].feature == w[1].feature) {
            return Err(Error::InvalidGrid("feature listed twice".into()));
        }
        Ok(Self { strategy: GridStrategy::Explicit, features, dropped: Vec::new() })
    }
}

impl Serialize for CutGrid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

/// Type-7 sample quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Builds candidate thresholds for every feature.
///
/// Quantile grids use the `k / bins` sample quantiles, `k = 1..bins-1`. A candidate equal to
/// the feature minimum is moved to the midpoint between the two smallest distinct values
/// (same indicator column, but strictly inside the range); candidates at or above the maximum
/// are dropped. Candidates producing identical indicator columns are merged, keeping the first.
pub fn build_cut_grid(ds: &SurvivalDataset, bins_per_feature: usize, strategy: GridStrategy) -> Result<CutGrid> {
    if bins_per_feature < 2 {
        return Err(Error::InvalidConfig("bins_per_feature must be at least 2".into()));
    }
    if strategy == GridStrategy::Explicit {
        return Err(Error::InvalidConfig("explicit grids are built with CutGrid::explicit".into()));
    }
    let mut features = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..ds.n_features() {
        let name = ds.feature_names()[j].clone();
        let mut sorted = ds.feature(j).to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut distinct = sorted.clone();
        distinct.dedup();
        if distinct.len() < 2 {
            log::warn!("feature `{name}` has fewer than two distinct values; dropped");
            dropped.push(DroppedFeature { feature: j, name, reason: "fewer than 2 distinct values".into() });
            continue;
        }
        let (lo, hi) = (distinct[0], distinct[distinct.len() - 1]);
        let candidates = (1..bins_per_feature).map(|k| {
            let p = k as f64 / bins_per_feature as f64;
            match strategy {
                GridStrategy::Quantile => quantile_sorted(&sorted, p),
                _ => lo + p * (hi - lo),
            }
        });
        let mut thresholds: Vec<f64> = Vec::new();
        let mut last_class = 0usize;
        for q in candidates {
            if q >= hi {
                continue;
            }
            let q = if q <= lo { 0.5 * (distinct[0] + distinct[1]) } else { q };
            // Number of distinct values <= q fixes the indicator column.
            let class = distinct.partition_point(|&v| v <= q);
            if class > last_class {
                thresholds.push(q);
                last_class = class;
            }
        }
        features.push(FeatureGrid { feature: j, name, thresholds });
    }
    Ok(CutGrid { strategy, features, dropped })
}

/// Metadata linking a design column to its feature and threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub feature: usize,
    /// Index of the threshold within the feature's grid.
    pub threshold_index: usize,
    pub threshold: f64,
    /// Unpenalized `1{x > min}` anchor column rather than a candidate cut-point.
    pub boundary: bool,
}

/// Sparse 0/1 cumulative design in compressed-column form.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeDesign {
    n_rows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    meta: Vec<ColumnMeta>,
    penalty_exempt: Vec<usize>,
}

impl CumulativeDesign {
    pub fn column_meta(&self) -> &[ColumnMeta] {
        &self.meta
    }

    /// Columns that carry zero penalty weight.
    pub fn penalty_exempt(&self) -> &[usize] {
        &self.penalty_exempt
    }

    pub fn rows_of(&self, k: usize) -> &[u32] {
        &self.row_idx[self.col_ptr[k]..self.col_ptr[k + 1]]
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.rows_of(col).binary_search(&(row as u32)).is_ok()
    }

    /// Column indices belonging to feature `j`, ascending.
    pub fn columns_of_feature(&self, j: usize) -> Vec<usize> {
        (0..self.meta.len()).filter(|&k| self.meta[k].feature == j).collect()
    }

    /// Features present in the design, ascending.
    pub fn features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self.meta.iter().map(|m| m.feature).collect();
        f.dedup();
        f
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut meta = Vec::with_capacity(cols.len());
        let mut penalty_exempt = Vec::new();
        for (new_k, &k) in cols.iter().enumerate() {
            row_idx.extend_from_slice(self.rows_of(k));
            col_ptr.push(row_idx.len());
            meta.push(self.meta[k]);
            if self.penalty_exempt.contains(&k) {
                penalty_exempt.push(new_k);
            }
        }
        Self { n_rows: self.n_rows, col_ptr, row_idx, meta, penalty_exempt }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.meta.len());
        for k in 0..self.meta.len() {
            for &r in self.rows_of(k) {
                m[(r as usize, k)] = 1.0;
            }
        }
        m
    }
}

impl DesignMatrix for CumulativeDesign {
    fn n_rows(&self) -> usize {
        self.n_rows
    }

    fn n_cols(&self) -> usize {
        self.meta.len()
    }

    fn column(&self, k: usize) -> ColumnRef<'_> {
        ColumnRef::Indicator(self.rows_of(k))
    }
}

/// Builds `X^CB` with entry `(i, (j, l)) = 1{X_ij > mu_jl}`.
pub fn cumulative_binarize(ds: &SurvivalDataset, grid: &CutGrid) -> Result<CumulativeDesign> {
    build_design(ds, grid, false)
}

/// As [`cumulative_binarize`], adding one unpenalized `1{x > min_j}` column ahead of each
/// feature's threshold columns.
pub fn cumulative_binarize_with_boundary(ds: &SurvivalDataset, grid: &CutGrid) -> Result<CumulativeDesign> {
    build_design(ds, grid, true)
}

fn build_design(ds: &SurvivalDataset, grid: &CutGrid, boundary: bool) -> Result<CumulativeDesign> {
    let n = ds.n_rows();
    let mut col_ptr = vec![0];
    let mut row_idx = Vec::new();
    let mut meta = Vec::new();
    let mut penalty_exempt = Vec::new();
    for fg in &grid.features {
        if fg.feature >= ds.n_features() || ds.feature_names()[fg.feature] != fg.name {
            return Err(Error::GridMismatch(format!(
                "grid feature `{}` (index {}) not found in dataset",
                fg.name, fg.feature
            )));
        }
        let x = ds.feature(fg.feature);
        let lo = ds.feature_range(fg.feature).0;
        let mut boundary_rows = Vec::new();
        let mut cols: Vec<Vec<u32>> = vec![Vec::new(); fg.thresholds.len()];
        for (i, &v) in x.iter().enumerate() {
            if boundary && v > lo {
                boundary_rows.push(i as u32);
            }
            // strictly increasing thresholds: the row joins the first `below` columns
            let below = fg.thresholds.partition_point(|&t| t < v);
            for col in &mut cols[..below] {
                col.push(i as u32);
            }
        }
        if boundary {
            penalty_exempt.push(meta.len());
            meta.push(ColumnMeta { feature: fg.feature, threshold_index: 0, threshold: lo, boundary: true });
            row_idx.extend(boundary_rows);
            col_ptr.push(row_idx.len());
        }
        for (l, (&t, rows)) in fg.thresholds.iter().zip(cols).enumerate() {
            meta.push(ColumnMeta { feature: fg.feature, threshold_index: l, threshold: t, boundary: false });
            row_idx.extend(rows);
            col_ptr.push(row_idx.len());
        }
    }
    Ok(CumulativeDesign { n_rows: n, col_ptr, row_idx, meta, penalty_exempt })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub n_cols: usize,
    pub rank: usize,
    /// Pairs `(first, duplicate)` of exactly identical columns.
    pub duplicated: Vec<(usize, usize)>,
}

impl RankReport {
    pub fn is_full_rank(&self) -> bool {
        self.rank == self.n_cols && self.duplicated.is_empty()
    }
}

/// Numerical column rank (singular values above `1e-10 * s_max`) and duplicate detection.
pub fn design_rank_check(design: &CumulativeDesign) -> RankReport {
    let d = design.n_cols();
    let mut seen: HashMap<&[u32], usize> = HashMap::new();
    let mut duplicated = Vec::new();
    for k in 0..d {
        match seen.get(design.rows_of(k)) {
            Some(&first) => duplicated.push((first, k)),
            None => {
                seen.insert(design.rows_of(k), k);
            }
        }
    }
    let rank = if d == 0 {
        0
    } else {
        let sv = design.to_dense().singular_values();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        if smax == 0.0 {
            0
        } else {
            sv.iter().filter(|&&s| s > 1e-10 * smax).count()
        }
    };
    RankReport { n_cols: d, rank, duplicated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn ds_from(cols: Vec<Vec<f64>>) -> SurvivalDataset {
        let n = cols[0].len();
        let p = cols.len();
        let mut m = Array2::zeros((n, p));
        for (j, c) in cols.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        let names = (0..p).map(|j| format!("x{}", j + 1)).collect();
        SurvivalDataset::new(m, (1..=n).map(|t| t as f64).collect(), vec![true; n], names).unwrap()
    }

    #[test]
    fn quartiles_of_one_to_hundred() {
        let ds = ds_from(vec![(1..=100).map(f64::from).collect()]);
        let grid = build_cut_grid(&ds, 4, GridStrategy::Quantile).unwrap();
        // type-7 quantiles: 1 + 99 p
        assert_eq!(grid.features[0].thresholds, vec![25.75, 50.5, 75.25]);
    }

    #[test]
    fn tied_quantiles_collapse_to_one_threshold() {
        let mut x = vec![0.0; 90];
        x.extend(vec![1.0; 10]);
        let ds = ds_from(vec![x]);
        let grid = build_cut_grid(&ds, 4, GridStrategy::Quantile).unwrap();
        // all three quartiles equal 0 = min, each snapping to 0.5
        assert_eq!(grid.features[0].thresholds, vec![0.5]);
    }

    #[test]
    fn constant_feature_is_dropped() {
        let ds = ds_from(vec![vec![3.0; 5], vec![1.0, 2.0, 3.0, 4.0, 5.0]]);
        let grid = build_cut_grid(&ds, 4, GridStrategy::Quantile).unwrap();
        assert_eq!(grid.dropped.len(), 1);
        assert_eq!(grid.dropped[0].feature, 0);
        assert_eq!(grid.features.len(), 1);
        assert_eq!(grid.features[0].feature, 1);
    }

    #[test]
    fn indicator_definition_and_boundary() {
        let ds = ds_from(vec![vec![0.7, 0.5, 0.1]]);
        let grid = CutGrid::explicit(&ds, vec![(0, vec![0.3, 0.5, 0.9])]).unwrap();
        let d = cumulative_binarize(&ds, &grid).unwrap();
        let row = |i| (0..3).map(|k| d.get(i, k) as u8).collect::<Vec<_>>();
        assert_eq!(row(0), vec![1, 1, 0]);
        assert_eq!(row(1), vec![1, 0, 0]);
        assert_eq!(row(2), vec![0, 0, 0]);
    }

    #[test]
    fn boundary_columns_are_exempt() {
        let ds = ds_from(vec![vec![0.1, 0.5, 0.9, 0.2]]);
        let grid = CutGrid::explicit(&ds, vec![(0, vec![0.3])]).unwrap();
        let d = cumulative_binarize_with_boundary(&ds, &grid).unwrap();
        assert_eq!(d.n_cols(), 2);
        assert_eq!(d.penalty_exempt(), &[0]);
        assert_eq!(d.rows_of(0), &[1, 2, 3]);
        assert_eq!(d.rows_of(1), &[1, 2]);
    }

    #[test]
    fn grid_mismatch_detected() {
        let ds = ds_from(vec![vec![0.1, 0.5, 0.9]]);
        let other = ds_from(vec![vec![0.1, 0.5, 0.9], vec![1.0, 2.0, 3.0]]);
        let grid = build_cut_grid(&other, 2, GridStrategy::Quantile).unwrap();
        assert!(matches!(cumulative_binarize(&ds, &grid), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn rank_of_nested_columns() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let ds = ds_from(vec![x]);
        let grid = CutGrid::explicit(&ds, vec![(0, vec![2.5, 4.5, 7.5])]).unwrap();
        let r = design_rank_check(&cumulative_binarize(&ds, &grid).unwrap());
        assert_eq!(r.rank, 3);
        assert!(r.duplicated.is_empty());

        // no observation strictly between 4.2 and 4.7
        let grid = CutGrid::explicit(&ds, vec![(0, vec![2.5, 4.2, 4.7])]).unwrap();
        let r = design_rank_check(&cumulative_binarize(&ds, &grid).unwrap());
        assert_eq!(r.duplicated, vec![(1, 2)]);
        assert_eq!(r.rank, 2);

        let grid = CutGrid::explicit(&ds, vec![(0, vec![4.5])]).unwrap();
        assert_eq!(design_rank_check(&cumulative_binarize(&ds, &grid).unwrap()).rank, 1);
    }

    #[test]
    fn grid_json_round_trip() {
        let ds = ds_from(vec![(1..=20).map(f64::from).collect(), (1..=20).map(|v| f64::from(v * v)).collect()]);
        let grid = build_cut_grid(&ds, 5, GridStrategy::Quantile).unwrap();
        let json = grid.to_json();
        let back = CutGrid::from_json(&json, &ds).unwrap();
        assert_eq!(back.features, grid.features);
        let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
        assert_eq!(keys, vec!["x1", "x2"]);
    }

    #[test]
    fn uniform_grid_skips_empty_cells() {
        let ds = ds_from(vec![vec![0.0, 0.05, 0.1, 1.0]]);
        let grid = build_cut_grid(&ds, 10, GridStrategy::Uniform).unwrap();
        // candidates 0.1..0.9 all split {0, 0.05, 0.1} from {1}
        assert_eq!(grid.features[0].thresholds, vec![0.1]);
    }
}
