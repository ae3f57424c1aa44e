//! Recursive multi-step forecasting and forecast-evaluation statistics.

pub mod dm;
pub mod metrics;

use serde::{Deserialize, Serialize};

pub use dm::{
    diebold_mariano, diebold_mariano_or_tie, win_loss_ranking, DmResult, PairwiseResult, RankingRow, Winner,
    DEFAULT_ALPHA,
};
pub use metrics::{mae, overfitting_ratio, rmse};

use crate::data::WindowedDataset;
use crate::error::{Error, Result};

/// A one-step-ahead model that may carry state from row to row.
pub trait SequenceForecaster {
    type State: Clone;

    fn initial_state(&self) -> Self::State;

    /// Predicts the (normalized) target for `row` and advances the state.
    fn step(&self, state: &mut Self::State, row: &[f64]) -> Result<f64>;
}

/// Predicts the same value everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantForecaster(pub f64);

impl SequenceForecaster for ConstantForecaster {
    type State = ();

    fn initial_state(&self) {}

    fn step(&self, _: &mut (), _: &[f64]) -> Result<f64> {
        Ok(self.0)
    }
}

/// Predicts the most recent observed target (its `Lag_<target>_1` feature).
#[derive(Debug, Clone)]
pub struct PersistenceForecaster {
    lag_column: usize,
    to_target: Option<(crate::data::MinMax, crate::data::MinMax)>,
}

impl PersistenceForecaster {
    pub fn for_dataset(data: &WindowedDataset) -> Result<Self> {
        let lag_column = *data
            .target_lags
            .first()
            .ok_or_else(|| Error::usage("persistence needs the target's own lag as a feature"))?;
        let to_target = data
            .norm_stats
            .as_ref()
            .map(|s| (s.features[lag_column], s.target));
        Ok(Self { lag_column, to_target })
    }
}

impl SequenceForecaster for PersistenceForecaster {
    type State = ();

    fn initial_state(&self) {}

    fn step(&self, _: &mut (), row: &[f64]) -> Result<f64> {
        let v = row[self.lag_column];
        Ok(match &self.to_target {
            Some((feature, target)) => target.scale(feature.unscale(v)),
            None => v,
        })
    }
}

/// Predictions for one horizon step, indexed by forecast origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepForecast {
    /// 1-based step.
    pub step: usize,
    /// `predictions[t]` forecasts row `t + step - 1` from origin `t`.
    pub predictions: Vec<f64>,
    pub observations: Vec<f64>,
    pub rmse: f64,
    pub mae: f64,
}

impl StepForecast {
    pub fn errors(&self) -> Vec<f64> {
        self.predictions
            .iter()
            .zip(&self.observations)
            .map(|(p, o)| p - o)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonForecast {
    pub horizon: usize,
    pub steps: Vec<StepForecast>,
}

impl HorizonForecast {
    /// Mean of the per-step RMSE values.
    pub fn mean_step_rmse(&self) -> f64 {
        self.steps.iter().map(|s| s.rmse).sum::<f64>() / self.steps.len() as f64
    }

    pub fn mean_step_mae(&self) -> f64 {
        self.steps.iter().map(|s| s.mae).sum::<f64>() / self.steps.len() as f64
    }

    /// RMSE over the errors of all steps pooled together.
    pub fn pooled_rmse(&self) -> f64 {
        let (sse, n) = self.steps.iter().fold((0.0, 0usize), |(sse, n), s| {
            let e: f64 = s.errors().iter().map(|e| e * e).sum();
            (sse + e, n + s.predictions.len())
        });
        (sse / n as f64).sqrt()
    }

    pub fn pooled_mae(&self) -> f64 {
        let (sae, n) = self.steps.iter().fold((0.0, 0usize), |(sae, n), s| {
            let e: f64 = s.errors().iter().map(|e| e.abs()).sum();
            (sae + e, n + s.predictions.len())
        });
        sae / n as f64
    }
}

/// Value to write into target-lag `column` for a fed-back prediction.
fn feedback(data: &WindowedDataset, column: usize, prediction: f64) -> f64 {
    match &data.norm_stats {
        Some(stats) => stats.target_to_feature(column, prediction),
        None => prediction,
    }
}

/// Recursive `h`-step forecasts from every origin of `data`.
///
/// The model runs over the rows in order. From origin `t`, step 1 predicts row
/// `t` as-is, continuing the model's state from the rows before it. Step
/// `s > 1` branches from the state after row `t` and predicts row `t + s - 1`,
/// whose `Lag_<target>_k` features for `k < s` are replaced by the step
/// `s - k` prediction; all other features keep their observed values.
pub fn recursive_forecast<M: SequenceForecaster>(model: &M, data: &WindowedDataset, h: usize) -> Result<HorizonForecast> {
    if h == 0 {
        return Err(Error::usage("forecast horizon must be at least 1"));
    }
    let rows = data.len();
    if h >= rows {
        return Err(Error::usage(format!("horizon {h} needs more than {rows} rows")));
    }
    let mut predictions: Vec<Vec<f64>> = (1..=h).map(|s| Vec::with_capacity(rows + 1 - s)).collect();
    let mut state = model.initial_state();
    let mut chain = Vec::with_capacity(h);
    for origin in 0..rows {
        chain.clear();
        chain.push(model.step(&mut state, &data.rows[origin])?);
        let mut branch = state.clone();
        for s in 2..=h {
            let target_row = origin + s - 1;
            if target_row >= rows {
                break;
            }
            let mut row = data.rows[target_row].clone();
            for (k, &col) in data.target_lags.iter().enumerate().take(s - 1) {
                // lag k+1 of row origin+s-1 is the step s-k-1 forecast
                row[col] = feedback(data, col, chain[s - k - 2]);
            }
            chain.push(model.step(&mut branch, &row)?);
        }
        for (s, &y) in chain.iter().enumerate() {
            predictions[s].push(y);
        }
    }

    let steps = predictions
        .into_iter()
        .enumerate()
        .map(|(i, preds)| {
            let step = i + 1;
            let observations = data.targets[i..].to_vec();
            Ok(StepForecast {
                step,
                rmse: rmse(&preds, &observations)?,
                mae: mae(&preds, &observations)?,
                predictions: preds,
                observations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HorizonForecast { horizon: h, steps })
}
