//! Bagged CART regression trees.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    /// Features tried per split; `max(1, ⌈m/3⌉)` when unset.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 100,
            mtry: None,
            min_leaf: 5,
            seed: 42,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::usage("a forest needs at least one tree"));
        }
        if self.min_leaf == 0 {
            return Err(Error::usage("min_leaf must be at least 1"));
        }
        if self.mtry == Some(0) {
            return Err(Error::usage("mtry must be at least 1"));
        }
        Ok(())
    }

    pub fn resolved_mtry(&self, features: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| features.div_ceil(3).max(1))
            .clamp(1, features.max(1))
    }
}

/// A regression tree stored as parallel node arrays. Node 0 is the root;
/// leaves have `feature == None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub feature: Vec<Option<usize>>,
    pub threshold: Vec<f64>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub value: Vec<f64>,
    /// Training rows drawn for this tree (with replacement).
    pub bootstrap: Vec<usize>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        while let Some(f) = self.feature[node] {
            node = if x[f] <= self.threshold[node] {
                self.left[node]
            } else {
                self.right[node]
            };
        }
        self.value[node]
    }

    pub fn node_count(&self) -> usize {
        self.value.len()
    }

    fn push_leaf(&mut self, value: f64) -> usize {
        self.feature.push(None);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.value.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestRegressor {
    pub trees: Vec<RegressionTree>,
    pub n_features: usize,
    pub mtry: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl RandomForestRegressor {
    /// Mean of the per-tree predictions.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        centered_mean(&preds)
    }
}

/// Mean taken relative to the first value, so identical inputs give that value exactly.
fn centered_mean(values: &[f64]) -> f64 {
    let first = values[0];
    first + values.iter().map(|v| v - first).sum::<f64>() / values.len() as f64
}

struct Split {
    feature: usize,
    threshold: f64,
    /// Sum of squared deviations of both children.
    sse: f64,
}

fn best_split_on(x: &[Vec<f64>], y: &[f64], rows: &mut [usize], feature: usize, min_leaf: usize) -> Option<Split> {
    rows.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]).then(a.cmp(&b)));
    let n = rows.len();
    let total: f64 = rows.iter().map(|&r| y[r]).sum();
    let total_sq: f64 = rows.iter().map(|&r| y[r] * y[r]).sum();
    let mut best: Option<Split> = None;
    let mut left_sum = 0.0;
    let mut left_sq = 0.0;
    for i in 1..n {
        let prev = rows[i - 1];
        left_sum += y[prev];
        left_sq += y[prev] * y[prev];
        if i < min_leaf || n - i < min_leaf {
            continue;
        }
        let (a, b) = (x[prev][feature], x[rows[i]][feature]);
        if a >= b {
            continue;
        }
        let (nl, nr) = (i as f64, (n - i) as f64);
        let right_sum = total - left_sum;
        let right_sq = total_sq - left_sq;
        let sse = (left_sq - left_sum * left_sum / nl) + (right_sq - right_sum * right_sum / nr);
        if best.as_ref().is_none_or(|s| sse < s.sse) {
            let mid = a + (b - a) / 2.0;
            let threshold = if mid < b { mid } else { a };
            best = Some(Split {
                feature,
                threshold,
                sse,
            });
        }
    }
    best
}

fn grow_tree(x: &[Vec<f64>], y: &[f64], bootstrap: Vec<usize>, mtry: usize, min_leaf: usize, rng: &mut ChaCha8Rng) -> RegressionTree {
    let n_features = x[0].len();
    let mut tree = RegressionTree {
        feature: Vec::new(),
        threshold: Vec::new(),
        left: Vec::new(),
        right: Vec::new(),
        value: Vec::new(),
        bootstrap: Vec::new(),
    };
    // (node slot, rows reaching it)
    let mut pending = vec![(tree.push_leaf(0.0), bootstrap.clone())];
    while let Some((node, mut rows)) = pending.pop() {
        let ys: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
        tree.value[node] = centered_mean(&ys);
        let constant = rows.iter().all(|&r| y[r] == y[rows[0]]);
        if constant || rows.len() < 2 * min_leaf {
            continue;
        }
        let mut best: Option<Split> = None;
        for f in sample(rng, n_features, mtry).into_iter() {
            if let Some(s) = best_split_on(x, y, &mut rows, f, min_leaf) {
                if best.as_ref().is_none_or(|b| s.sse < b.sse) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else { continue };
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| x[r][split.feature] <= split.threshold);
        let l = tree.push_leaf(0.0);
        let r = tree.push_leaf(0.0);
        tree.feature[node] = Some(split.feature);
        tree.threshold[node] = split.threshold;
        tree.left[node] = l;
        tree.right[node] = r;
        pending.push((r, r_rows));
        pending.push((l, l_rows));
    }
    tree.bootstrap = bootstrap;
    tree
}

/// Fits `params.trees` CART trees, each on its own bootstrap sample. Trees are
/// grown in parallel; tree `k` draws from its own stream of the seeded RNG, so
/// the forest does not depend on the thread count.
pub fn fit_forest(x: &[Vec<f64>], y: &[f64], params: &ForestParams) -> Result<RandomForestRegressor> {
    params.validate()?;
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::usage(format!("a forest needs at least 2 training rows, got {}", x.len())));
    }
    let n_features = x[0].len();
    if n_features == 0 || x.iter().any(|r| r.len() != n_features) {
        return Err(Error::usage("forest inputs must be a nonempty rectangular matrix"));
    }
    let mtry = params.resolved_mtry(n_features);
    let n = x.len();
    let trees = (0..params.trees)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(k as u64);
            let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            grow_tree(x, y, bootstrap, mtry, params.min_leaf, &mut rng)
        })
        .collect();
    Ok(RandomForestRegressor {
        trees,
        n_features,
        mtry,
        min_leaf: params.min_leaf,
        seed: params.seed,
    })
}
