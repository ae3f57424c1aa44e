//! Diebold-Mariano comparison of two forecast-error sequences with the
//! Harvey-Leybourne-Newbold small-sample correction, and the win-loss table
//! built from many such comparisons.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    ModelA,
    ModelB,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub statistic: f64,
    pub p_value: f64,
    pub winner: Winner,
    /// True when the loss differential had no variance.
    pub degenerate: bool,
}

impl DmResult {
    pub fn degenerate_tie() -> Self {
        Self {
            statistic: 0.0,
            p_value: 1.0,
            winner: Winner::Tie,
            degenerate: true,
        }
    }
}

/// Two-sided DM test on squared-error loss.
///
/// `d_t = e_a,t² − e_b,t²`; the long-run variance uses autocovariances at lags
/// `0..h`. A positive statistic means model A has the larger loss, so a
/// significant positive result is a win for model B.
pub fn diebold_mariano(errors_a: &[f64], errors_b: &[f64], h: usize, alpha: f64) -> Result<DmResult> {
    if errors_a.len() != errors_b.len() {
        return Err(Error::Dimension {
            expected: errors_a.len(),
            actual: errors_b.len(),
        });
    }
    let t = errors_a.len();
    if t < 10 {
        return Err(Error::usage(format!("Diebold-Mariano test needs at least 10 errors, got {t}")));
    }
    if h == 0 || h >= t {
        return Err(Error::usage(format!("horizon {h} must be in 1..{t}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::usage(format!("significance level must be in (0, 1), got {alpha}")));
    }

    let d: Vec<f64> = errors_a.iter().zip(errors_b).map(|(a, b)| a * a - b * b).collect();
    let tf = t as f64;
    let mean = d.iter().sum::<f64>() / tf;
    let autocov = |lag: usize| -> f64 {
        (lag..t).map(|i| (d[i] - mean) * (d[i - lag] - mean)).sum::<f64>() / tf
    };
    let long_run = autocov(0) + 2.0 * (1..h).map(autocov).sum::<f64>();
    let variance = long_run / tf;
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::Degenerate(format!(
            "loss differential variance is {variance:e}"
        )));
    }
    let hf = h as f64;
    let correction = ((tf + 1.0 - 2.0 * hf + hf * (hf - 1.0) / tf) / tf).sqrt();
    let statistic = mean / variance.sqrt() * correction;

    let dist = StudentsT::new(0.0, 1.0, tf - 1.0).expect("valid degrees of freedom");
    let p_value = (2.0 * dist.sf(statistic.abs())).clamp(0.0, 1.0);
    let winner = if p_value >= alpha {
        Winner::Tie
    } else if statistic > 0.0 {
        Winner::ModelB
    } else {
        Winner::ModelA
    };
    Ok(DmResult {
        statistic,
        p_value,
        winner,
        degenerate: false,
    })
}

/// Like [`diebold_mariano`] but reports a degenerate test as a tie.
pub fn diebold_mariano_or_tie(errors_a: &[f64], errors_b: &[f64], h: usize, alpha: f64) -> Result<DmResult> {
    match diebold_mariano(errors_a, errors_b, h, alpha) {
        Err(Error::Degenerate(_)) => Ok(DmResult::degenerate_tie()),
        other => other,
    }
}

/// One DM comparison between methods `a` and `b` at a forecast step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseResult {
    pub a: usize,
    pub b: usize,
    pub step: usize,
    pub result: DmResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub method: String,
    pub wins: u32,
    pub losses: u32,
    pub net: i64,
}

/// Counts a win and a loss for every significant comparison and sorts
/// methods by wins minus losses (input order breaks ties).
pub fn win_loss_ranking(methods: &[String], results: &[PairwiseResult]) -> Result<Vec<RankingRow>> {
    let mut wins = vec![0u32; methods.len()];
    let mut losses = vec![0u32; methods.len()];
    let mut seen = HashSet::new();
    for r in results {
        if r.a >= methods.len() || r.b >= methods.len() || r.a == r.b {
            return Err(Error::usage(format!("invalid method pair ({}, {})", r.a, r.b)));
        }
        let key = (r.a.min(r.b), r.a.max(r.b), r.step);
        if !seen.insert(key) {
            return Err(Error::usage(format!(
                "duplicate comparison of methods {} and {} at step {}",
                key.0, key.1, r.step
            )));
        }
        match r.result.winner {
            Winner::ModelA => {
                wins[r.a] += 1;
                losses[r.b] += 1;
            }
            Winner::ModelB => {
                wins[r.b] += 1;
                losses[r.a] += 1;
            }
            Winner::Tie => {}
        }
    }
    let mut rows: Vec<RankingRow> = methods
        .iter()
        .enumerate()
        .map(|(i, m)| RankingRow {
            method: m.clone(),
            wins: wins[i],
            losses: losses[i],
            net: i64::from(wins[i]) - i64::from(losses[i]),
        })
        .collect();
    rows.sort_by_key(|r| std::cmp::Reverse(r.net));
    Ok(rows)
}
