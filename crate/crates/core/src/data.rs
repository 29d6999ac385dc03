//! Survival datasets: ingestion, validation and standardization.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-censored outcome borrowed from a dataset.
#[derive(Debug, Clone, Copy)]
pub struct Outcome<'a> {
    pub times: &'a [f64],
    pub events: &'a [bool],
}

impl<'a> Outcome<'a> {
    pub fn new(times: &'a [f64], events: &'a [bool]) -> Result<Self> {
        if times.len() != events.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                found: events.len(),
            });
        }
        Ok(Self { times, events })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }
}

/// Predictor matrix plus right-censored outcome.
///
/// Immutable once constructed; all invariants are checked in [`SurvivalDataset::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    features: Array2<f64>,
    times: Vec<f64>,
    events: Vec<bool>,
    feature_names: Vec<String>,
}

impl SurvivalDataset {
    pub fn new(
        features: Array2<f64>,
        times: Vec<f64>,
        events: Vec<bool>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = features.nrows();
        if times.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: times.len() });
        }
        if events.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: events.len() });
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::DimensionMismatch {
                expected: features.ncols(),
                found: feature_names.len(),
            });
        }
        if n < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 rows, found {n}")));
        }
        if let Some(i) = times.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::NonPositiveTime(i + 1));
        }
        if !events.iter().any(|&e| e) {
            return Err(Error::NoEvents);
        }
        if let Some(((i, j), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonNumericCell { row: i + 1, col: feature_names[j].clone() });
        }
        Ok(Self { features, times, events, feature_names })
    }

    pub fn n_rows(&self) -> usize {
        self.times.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature(&self, j: usize) -> ArrayView1<'_, f64> {
        self.features.column(j)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn outcome(&self) -> Outcome<'_> {
        Outcome { times: &self.times, events: &self.events }
    }

    /// Observed `[min, max]` of feature `j`.
    pub fn feature_range(&self, j: usize) -> (f64, f64) {
        self.feature(j)
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Dataset restricted to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let features = self.features.select(ndarray::Axis(0), rows);
        let times = rows.iter().map(|&i| self.times[i]).collect();
        let events = rows.iter().map(|&i| self.events[i]).collect();
        Self::new(features, times, events, self.feature_names.clone())
    }

    /// Dataset restricted to the given feature columns.
    pub fn select_features(&self, cols: &[usize]) -> Result<Self> {
        let features = self.features.select(ndarray::Axis(1), cols);
        let names = cols.iter().map(|&j| self.feature_names[j].clone()).collect();
        Self::new(features, self.times.clone(), self.events.clone(), names)
    }
}

/// Loads a dataset from a header-bearing, comma-separated file.
///
/// Every column other than `time_col` and `event_col` becomes a feature, in file order.
pub fn load_csv(path: impl AsRef<Path>, time_col: &str, event_col: &str) -> Result<SurvivalDataset> {
    let reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    read_csv(reader, time_col, event_col)
}

/// Same as [`load_csv`] but from any reader.
pub fn read_csv<R: std::io::Read>(
    mut reader: csv::Reader<R>,
    time_col: &str,
    event_col: &str,
) -> Result<SurvivalDataset> {
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let time_idx = headers
        .iter()
        .position(|h| h == time_col)
        .ok_or_else(|| Error::MissingColumn(time_col.to_string()))?;
    let event_idx = headers
        .iter()
        .position(|h| h == event_col)
        .ok_or_else(|| Error::MissingColumn(event_col.to_string()))?;
    let feature_cols: Vec<usize> =
        (0..headers.len()).filter(|&c| c != time_idx && c != event_idx).collect();

    let mut times = Vec::new();
    let mut events = Vec::new();
    let mut values = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let cell = |c: usize| -> Result<f64> {
            record
                .get(c)
                .map(str::trim)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumericCell { row, col: headers[c].clone() })
        };
        let t = cell(time_idx)?;
        if t <= 0.0 {
            return Err(Error::NonPositiveTime(row));
        }
        let e = match record.get(event_idx).map(str::trim) {
            Some("0") => false,
            Some("1") => true,
            Some(s) => match s.parse::<f64>() {
                Ok(0.0) => false,
                Ok(1.0) => true,
                Ok(_) => return Err(Error::InvalidEventCode(row)),
                Err(_) => {
                    return Err(Error::NonNumericCell { row, col: headers[event_idx].clone() })
                }
            },
            None => return Err(Error::NonNumericCell { row, col: headers[event_idx].clone() }),
        };
        times.push(t);
        events.push(e);
        for &c in &feature_cols {
            values.push(cell(c)?);
        }
    }
    let n = times.len();
    let features = Array2::from_shape_vec((n, feature_cols.len()), values)
        .map_err(|e| Error::InvalidDataset(e.to_string()))?;
    let names = feature_cols.iter().map(|&c| headers[c].clone()).collect();
    SurvivalDataset::new(features, times, events, names)
}

/// Writes `time,event,<features...>` with shortest round-trip float formatting.
pub fn write_csv(ds: &SurvivalDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(ds, file)
}

pub fn write_csv_to<W: std::io::Write>(ds: &SurvivalDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["time".to_string(), "event".to_string()];
    header.extend(ds.feature_names.iter().cloned());
    w.write_record(&header)?;
    for i in 0..ds.n_rows() {
        let mut rec = Vec::with_capacity(ds.n_features() + 2);
        rec.push(format!("{}", ds.times[i]));
        rec.push(if ds.events[i] { "1".into() } else { "0".into() });
        rec.extend(ds.features.row(i).iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Column means and sample standard deviations (n - 1 denominator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl StandardizationParams {
    pub fn apply(&self, features: &Array2<f64>) -> Array2<f64> {
        let mut out = features.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| (v - self.means[j]) / self.sds[j]);
        }
        out
    }

    pub fn invert(&self, features: &Array2<f64>) -> Array2<f64> {
        let mut out = features.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| v * self.sds[j] + self.means[j]);
        }
        out
    }

    /// Maps a threshold on the standardized scale back to the original scale.
    pub fn unscale_threshold(&self, j: usize, value: f64) -> f64 {
        value * self.sds[j] + self.means[j]
    }
}

pub fn standardize(ds: &SurvivalDataset) -> Result<(SurvivalDataset, StandardizationParams)> {
    let n = ds.n_rows() as f64;
    let mut means = Vec::with_capacity(ds.n_features());
    let mut sds = Vec::with_capacity(ds.n_features());
    for j in 0..ds.n_features() {
        let col = ds.feature(j);
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        if !(sd > 0.0) || sd <= 1e-14 * mean.abs() {
            return Err(Error::ConstantFeature(j));
        }
        means.push(mean);
        sds.push(sd);
    }
    let params = StandardizationParams { means, sds };
    let features = params.apply(&ds.features);
    let out = SurvivalDataset {
        features,
        times: ds.times.clone(),
        events: ds.events.clone(),
        feature_names: ds.feature_names.clone(),
    };
    Ok((out, params))
}

/// Rows sharing one event time (0-based row indices).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TieGroup {
    pub time: f64,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSummary {
    pub name: String,
    pub distinct_count: usize,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub n: usize,
    pub p: usize,
    pub event_count: usize,
    pub event_rate: f64,
    pub features: Vec<FeatureSummary>,
    pub tie_groups: Vec<TieGroup>,
}

pub fn validate(ds: &SurvivalDataset) -> ValidationReport {
    let features = (0..ds.n_features())
        .map(|j| {
            let mut vals: Vec<f64> = ds.feature(j).to_vec();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            FeatureSummary {
                name: ds.feature_names[j].clone(),
                distinct_count: vals.len(),
                min: vals[0],
                max: vals[vals.len() - 1],
            }
        })
        .collect();

    let mut by_time: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, (&t, &e)) in ds.times.iter().zip(&ds.events).enumerate() {
        if e {
            by_time.entry(t.to_bits()).or_default().push(i);
        }
    }
    let mut tie_groups: Vec<TieGroup> = by_time
        .into_iter()
        .filter(|(_, rows)| rows.len() > 1)
        .map(|(bits, rows)| TieGroup { time: f64::from_bits(bits), rows })
        .collect();
    tie_groups.sort_by(|a, b| a.time.total_cmp(&b.time));

    let event_count = ds.events.iter().filter(|&&e| e).count();
    ValidationReport {
        n: ds.n_rows(),
        p: ds.n_features(),
        event_count,
        event_rate: event_count as f64 / ds.n_rows() as f64,
        features,
        tie_groups,
    }
}
