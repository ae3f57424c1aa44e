use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::artifacts::{read_predictions, write_csv, PredictionRecord, PREDICTIONS_TEST};
use crate::error::{Error, Result};
use crate::forecast::{diebold_mariano_or_tie, win_loss_ranking, PairwiseResult, RankingRow, Winner};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub methods: Vec<String>,
    pub horizon: usize,
    pub alpha: f64,
    pub pairwise: Vec<PairwiseResult>,
    pub ranking: Vec<RankingRow>,
}

/// Test-set errors of one run, keyed by step.
struct RunErrors {
    steps: BTreeMap<usize, (Vec<f64>, Vec<f64>)>,
}

fn load(dir: &Path) -> Result<RunErrors> {
    let records: Vec<PredictionRecord> = read_predictions(&dir.join(PREDICTIONS_TEST))?;
    let mut steps: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let (errors, obs) = steps.entry(r.step).or_default();
        if r.origin != errors.len() {
            return Err(Error::data(format!(
                "{}: step {} records are out of order",
                dir.display(),
                r.step
            )));
        }
        errors.push(r.prediction - r.observation);
        obs.push(r.observation);
    }
    if steps.is_empty() {
        return Err(Error::data(format!("{}: no test predictions", dir.display())));
    }
    Ok(RunErrors { steps })
}

fn method_names(dirs: &[PathBuf]) -> Vec<String> {
    let short: Vec<String> = dirs
        .iter()
        .map(|d| {
            d.file_name()
                .map_or_else(|| d.display().to_string(), |n| n.to_string_lossy().into_owned())
        })
        .collect();
    let unique = short.iter().enumerate().all(|(i, s)| !short[..i].contains(s));
    if unique {
        short
    } else {
        dirs.iter().map(|d| d.display().to_string()).collect()
    }
}

/// Pairwise DM tests at every step between the test forecasts of completed
/// runs, and the win-loss ranking they produce. Step `s` uses horizon `s`.
pub fn compare_runs(run_dirs: &[PathBuf], alpha: f64) -> Result<CompareReport> {
    if run_dirs.len() < 2 {
        return Err(Error::usage("comparison needs at least two run directories"));
    }
    let runs = run_dirs.iter().map(|d| load(d)).collect::<Result<Vec<_>>>()?;
    let reference = &runs[0];
    for (dir, run) in run_dirs.iter().zip(&runs).skip(1) {
        let same = run.steps.len() == reference.steps.len()
            && run
                .steps
                .iter()
                .zip(&reference.steps)
                .all(|((s, (_, o)), (rs, (_, ro)))| s == rs && o == ro);
        if !same {
            return Err(Error::usage(format!(
                "{} and {} were not evaluated on the same test set",
                run_dirs[0].display(),
                dir.display()
            )));
        }
    }

    let methods = method_names(run_dirs);
    let mut pairwise = Vec::new();
    for &step in reference.steps.keys() {
        for a in 0..runs.len() {
            for b in a + 1..runs.len() {
                let ea = &runs[a].steps[&step].0;
                let eb = &runs[b].steps[&step].0;
                pairwise.push(PairwiseResult {
                    a,
                    b,
                    step,
                    result: diebold_mariano_or_tie(ea, eb, step, alpha)?,
                });
            }
        }
    }
    let ranking = win_loss_ranking(&methods, &pairwise)?;
    Ok(CompareReport {
        horizon: reference.steps.len(),
        methods,
        alpha,
        pairwise,
        ranking,
    })
}

fn winner_label(w: Winner) -> &'static str {
    match w {
        Winner::ModelA => "method_a",
        Winner::ModelB => "method_b",
        Winner::Tie => "tie",
    }
}

impl CompareReport {
    pub fn write_ranking_csv(&self, path: &Path) -> Result<()> {
        let rows = self.ranking.iter().enumerate().map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                r.method.clone(),
                r.wins.to_string(),
                r.losses.to_string(),
                r.net.to_string(),
            ]
        });
        write_csv(path, &["rank", "method", "wins", "losses", "net"], rows)
    }

    pub fn write_pairwise_csv(&self, path: &Path) -> Result<()> {
        let rows = self.pairwise.iter().map(|p| {
            vec![
                self.methods[p.a].clone(),
                self.methods[p.b].clone(),
                p.step.to_string(),
                p.result.statistic.to_string(),
                p.result.p_value.to_string(),
                winner_label(p.result.winner).to_string(),
                p.result.degenerate.to_string(),
            ]
        });
        write_csv(
            path,
            &["method_a", "method_b", "step", "statistic", "p_value", "winner", "degenerate"],
            rows,
        )
    }

    /// Plain-text ranking table.
    pub fn render_table(&self) -> String {
        let width = self.methods.iter().map(String::len).max().unwrap_or(6).max(6);
        let mut out = format!("{:<4} {:<width$} {:>6} {:>6} {:>6}\n", "rank", "method", "wins", "losses", "net");
        for (i, r) in self.ranking.iter().enumerate() {
            out.push_str(&format!(
                "{:<4} {:<width$} {:>6} {:>6} {:>6}\n",
                i + 1,
                r.method,
                r.wins,
                r.losses,
                r.net
            ));
        }
        out
    }
}
