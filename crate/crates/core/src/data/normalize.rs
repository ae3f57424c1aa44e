use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::window::WindowedDataset;
use crate::error::{Error, Result};

/// Where min-max statistics come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// Each dataset is scaled with its own statistics (train and test apart).
    #[default]
    PerSplit,
    /// Apply statistics fitted on the training rows.
    TrainStats,
}

impl fmt::Display for NormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormMode::PerSplit => "per_split",
            NormMode::TrainStats => "train_stats",
        })
    }
}

impl FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_split" => Ok(NormMode::PerSplit),
            "train_stats" => Ok(NormMode::TrainStats),
            other => Err(Error::usage(format!(
                "unknown normalization mode `{other}` (expected per_split or train_stats)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Self {
        values.into_iter().fold(
            MinMax {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            },
            |acc, v| MinMax {
                min: acc.min.min(v),
                max: acc.max.max(v),
            },
        )
    }

    fn is_constant(&self) -> bool {
        self.max <= self.min
    }

    /// Maps `[min, max]` to `[0, 1]`; a constant column maps to 0.5.
    pub fn scale(&self, x: f64) -> f64 {
        if self.is_constant() {
            0.5
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }

    pub fn unscale(&self, y: f64) -> f64 {
        if self.is_constant() {
            self.min
        } else {
            self.min + y * (self.max - self.min)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mode: NormMode,
    pub features: Vec<MinMax>,
    pub target: MinMax,
}

impl NormStats {
    pub fn fit(ds: &WindowedDataset, mode: NormMode) -> Self {
        let features = (0..ds.feature_count())
            .map(|c| MinMax::fit(ds.rows.iter().map(|r| r[c])))
            .collect();
        NormStats {
            mode,
            features,
            target: MinMax::fit(ds.targets.iter().copied()),
        }
    }

    /// Converts a normalized target value into the scale of feature `column`.
    pub fn target_to_feature(&self, column: usize, y: f64) -> f64 {
        self.features[column].scale(self.target.unscale(y))
    }
}

/// Min-max scales every feature column and the targets.
///
/// `PerSplit` mode fits statistics on `ds` itself and ignores `stats`;
/// `TrainStats` mode requires the training statistics in `stats`.
pub fn normalize(ds: &WindowedDataset, mode: NormMode, stats: Option<&NormStats>) -> Result<WindowedDataset> {
    if ds.norm_stats.is_some() {
        return Err(Error::usage("dataset is already normalized"));
    }
    let stats = match mode {
        NormMode::PerSplit => NormStats::fit(ds, mode),
        NormMode::TrainStats => {
            let s = stats.ok_or_else(|| Error::usage("train_stats normalization needs training statistics"))?;
            if s.features.len() != ds.feature_count() {
                return Err(Error::Dimension {
                    expected: ds.feature_count(),
                    actual: s.features.len(),
                });
            }
            NormStats {
                mode,
                ..s.clone()
            }
        }
    };
    let rows = ds
        .rows
        .iter()
        .map(|r| r.iter().zip(&stats.features).map(|(&v, m)| m.scale(v)).collect())
        .collect();
    let targets = ds.targets.iter().map(|&t| stats.target.scale(t)).collect();
    Ok(WindowedDataset {
        feature_names: ds.feature_names.clone(),
        rows,
        targets,
        target_lags: ds.target_lags.clone(),
        norm_stats: Some(stats),
    })
}

/// Undoes [`normalize`]; unnormalized input is returned unchanged.
pub fn denormalize(ds: &WindowedDataset) -> WindowedDataset {
    let Some(stats) = &ds.norm_stats else {
        return ds.clone();
    };
    WindowedDataset {
        feature_names: ds.feature_names.clone(),
        rows: ds
            .rows
            .iter()
            .map(|r| r.iter().zip(&stats.features).map(|(&v, m)| m.unscale(v)).collect())
            .collect(),
        targets: ds.targets.iter().map(|&t| stats.target.unscale(t)).collect(),
        target_lags: ds.target_lags.clone(),
        norm_stats: None,
    }
}
