use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::normalize::NormStats;
use super::series::RawSeries;
use crate::error::{Error, Result};

/// Lagged feature rows with one target per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedDataset {
    /// `Lag_<attr>_<k>` for every attribute and lag.
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    /// Column of `Lag_<target>_k` at position `k - 1`; empty when the target's
    /// own lags are not features.
    pub target_lags: Vec<usize>,
    /// Min-max statistics the rows and targets were scaled with, if any.
    pub norm_stats: Option<NormStats>,
}

impl WindowedDataset {
    /// Builds an unnormalized dataset with no target-lag metadata.
    pub fn from_rows(feature_names: Vec<String>, rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        let ds = Self {
            feature_names,
            rows,
            targets,
            target_lags: Vec::new(),
            norm_stats: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let q = self.feature_names.len();
        if self.rows.len() != self.targets.len() {
            return Err(Error::Dimension {
                expected: self.rows.len(),
                actual: self.targets.len(),
            });
        }
        if let Some(r) = self.rows.iter().find(|r| r.len() != q) {
            return Err(Error::Dimension {
                expected: q,
                actual: r.len(),
            });
        }
        if let Some(&c) = self.target_lags.iter().find(|&&c| c >= q) {
            return Err(Error::usage(format!("target lag column {c} out of range")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    /// Contiguous sub-range of rows sharing this dataset's metadata.
    pub fn slice(&self, range: Range<usize>) -> WindowedDataset {
        WindowedDataset {
            feature_names: self.feature_names.clone(),
            rows: self.rows[range.clone()].to_vec(),
            targets: self.targets[range].to_vec(),
            target_lags: self.target_lags.clone(),
            norm_stats: self.norm_stats.clone(),
        }
    }

    /// Concatenates datasets with identical features, in order.
    pub fn concat(parts: &[WindowedDataset]) -> Result<WindowedDataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::usage("cannot concatenate zero datasets"))?;
        let mut out = first.clone();
        for p in &parts[1..] {
            if p.feature_names != first.feature_names {
                return Err(Error::usage("cannot concatenate datasets with different features"));
            }
            out.rows.extend(p.rows.iter().cloned());
            out.targets.extend_from_slice(&p.targets);
        }
        Ok(out)
    }
}

/// Time-ordered training partitions of (nearly) equal size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSet {
    pub partitions: Vec<WindowedDataset>,
}

impl PartitionSet {
    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.partitions.iter().map(WindowedDataset::len).collect()
    }
}

pub fn lag_name(attr: &str, lag: usize) -> String {
    format!("Lag_{attr}_{lag}")
}

/// Turns a gap-free series into lagged rows.
///
/// Row `t` holds `Lag_a_k = a[t - k]` for every attribute `a` and `k` in
/// `1..=window` (lag 1 is the most recent), and the target value at `t`.
pub fn sliding_window(series: &RawSeries, window: usize, include_target_lags: bool) -> Result<WindowedDataset> {
    if window == 0 {
        return Err(Error::usage("window must be positive"));
    }
    if series.len() <= window {
        return Err(Error::usage(format!(
            "series of length {} is too short for window {window}",
            series.len()
        )));
    }
    if series.has_missing() {
        return Err(Error::data("series has missing values; interpolate before windowing"));
    }
    let target_idx = series.target_index();
    let attrs: Vec<usize> = (0..series.columns.len())
        .filter(|&i| include_target_lags || i != target_idx)
        .collect();
    if attrs.is_empty() {
        return Err(Error::usage("no input attributes left after excluding the target"));
    }

    let mut feature_names = Vec::with_capacity(attrs.len() * window);
    let mut target_lags = Vec::new();
    for &a in &attrs {
        let name = &series.columns[a].name;
        for k in 1..=window {
            if a == target_idx {
                target_lags.push(feature_names.len());
            }
            feature_names.push(lag_name(name, k));
        }
    }

    let value = |col: usize, t: usize| series.columns[col].values[t].expect("gap-free series");
    let (rows, targets) = (window..series.len())
        .map(|t| {
            let row: Vec<f64> = attrs
                .iter()
                .flat_map(|&a| (1..=window).map(move |k| (a, k)))
                .map(|(a, k)| value(a, t - k))
                .collect();
            (row, value(target_idx, t))
        })
        .unzip();

    Ok(WindowedDataset {
        feature_names,
        rows,
        targets,
        target_lags,
        norm_stats: None,
    })
}

/// Holds out the final `⌊test_fraction·rows⌋` rows, preserving time order.
pub fn split_train_test(ds: &WindowedDataset, test_fraction: f64) -> Result<(WindowedDataset, WindowedDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::usage(format!(
            "test fraction must lie strictly between 0 and 1, got {test_fraction}"
        )));
    }
    let rows = ds.len();
    // tolerance for products like 0.2·1000 landing a hair under an integer
    let test = (test_fraction * rows as f64 + 1e-9).floor() as usize;
    if test == 0 || test >= rows {
        return Err(Error::usage(format!(
            "test fraction {test_fraction} of {rows} rows leaves an empty side"
        )));
    }
    let cut = rows - test;
    Ok((ds.slice(0..cut), ds.slice(cut..rows)))
}

/// Splits training rows into `n` contiguous blocks; the earliest block absorbs
/// any remainder.
pub fn partition_training(train: &WindowedDataset, n: usize) -> Result<PartitionSet> {
    if n < 2 {
        return Err(Error::usage(format!(
            "need at least two partitions for a multi-objective problem, got {n}"
        )));
    }
    let rows = train.len();
    if n > rows {
        return Err(Error::usage(format!("cannot split {rows} rows into {n} partitions")));
    }
    let base = rows / n;
    let first = base + rows % n;
    let mut partitions = Vec::with_capacity(n);
    let mut start = 0;
    for k in 0..n {
        let len = if k == 0 { first } else { base };
        partitions.push(train.slice(start..start + len));
        start += len;
    }
    Ok(PartitionSet { partitions })
}
