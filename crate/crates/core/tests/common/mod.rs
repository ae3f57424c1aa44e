//! Oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use lstm_moea::pipeline::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Masked LSTM recurrence read straight off the flat weight vector.
///
/// Block offsets: four `u×q` event matrices (i, f, l, o), four event biases,
/// four `u×u` hidden matrices, four hidden biases, `u` output weights, output
/// bias. Gate `g` row `r` column `c` of the event block is at
/// `g·u·q + r·q + c`.
pub fn reference_forward(q: usize, u: usize, mask: &[bool], w: &[f64], rows: &[Vec<f64>]) -> Vec<f64> {
    assert_eq!(w.len(), 4 * (q * u + u * u + 2 * u) + u + 1);
    let wx = |g: usize, r: usize, c: usize| w[g * u * q + r * q + c];
    let bx_base = 4 * u * q;
    let bx = |g: usize, r: usize| w[bx_base + g * u + r];
    let wh_base = bx_base + 4 * u;
    let wh = |g: usize, r: usize, c: usize| w[wh_base + g * u * u + r * u + c];
    let bh_base = wh_base + 4 * u * u;
    let bh = |g: usize, r: usize| w[bh_base + g * u + r];
    let wo_base = bh_base + 4 * u;
    let bo = w[wo_base + u];
    const I: usize = 0;
    const F: usize = 1;
    const L: usize = 2;
    const O: usize = 3;

    let mut h = vec![0.0; u];
    let mut c = vec![0.0; u];
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let d: Vec<f64> = row.iter().zip(mask).map(|(v, &m)| if m { *v } else { 0.0 }).collect();
        let pre = |g: usize, r: usize| {
            let mut hidden = bh(g, r);
            for k in 0..u {
                hidden += wh(g, r, k) * h[k];
            }
            let mut event = bx(g, r);
            for k in 0..q {
                event += wx(g, r, k) * d[k];
            }
            hidden + event
        };
        let mut new_h = vec![0.0; u];
        let mut new_c = vec![0.0; u];
        for r in 0..u {
            let f = sigmoid(pre(F, r)) * c[r];
            let i = sigmoid(pre(I, r)) * pre(L, r).tanh();
            new_c[r] = f + i;
            new_h[r] = sigmoid(pre(O, r)) * new_c[r].tanh();
        }
        h = new_h;
        c = new_c;
        let mut y = bo;
        for r in 0..u {
            y += w[wo_base + r] * h[r];
        }
        out.push(y);
    }
    out
}

pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Fronts by repeated peeling: each round keeps the remaining points that no
/// other remaining point dominates.
pub fn brute_force_fronts(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut fronts = Vec::new();
    while !remaining.is_empty() {
        let front: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| !remaining.iter().any(|&j| dominates(&points[j], &points[i])))
            .collect();
        remaining.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

/// Monte-Carlo estimate of the volume dominated by `front` inside the box
/// `[0, reference]`, with its standard error.
pub fn monte_carlo_hypervolume(front: &[Vec<f64>], reference: &[f64], samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = reference.len();
    let mut x = vec![0.0; dims];
    let mut hits = 0usize;
    for _ in 0..samples {
        for (k, v) in x.iter_mut().enumerate() {
            *v = rng.random::<f64>() * reference[k];
        }
        if front.iter().any(|p| p.iter().zip(&x).all(|(a, b)| a <= b)) {
            hits += 1;
        }
    }
    let volume: f64 = reference.iter().product();
    let p = hits as f64 / samples as f64;
    (p * volume, volume * (p * (1.0 - p) / samples as f64).sqrt())
}

/// Jittered-grid estimate of a 2-D dominated area: one uniform sample in each
/// cell of a `k × k` grid over `[0, reference]`.
pub fn stratified_hypervolume_2d(front: &[Vec<f64>], reference: [f64; 2], k: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for i in 0..k {
        for j in 0..k {
            let x = (i as f64 + rng.random::<f64>()) / k as f64 * reference[0];
            let y = (j as f64 + rng.random::<f64>()) / k as f64 * reference[1];
            if front.iter().any(|p| p[0] <= x && p[1] <= y) {
                hits += 1;
            }
        }
    }
    hits as f64 / (k * k) as f64 * reference[0] * reference[1]
}

/// Deterministic 600-row series: a two-period sine target, a phase-shifted
/// companion and a sawtooth.
pub fn write_sine_csv(path: &Path) {
    let mut s = String::from("t,y,x1,x2\n");
    for t in 0..600 {
        let tf = t as f64;
        let tau = std::f64::consts::TAU;
        let y = (tau * tf / 24.0).sin() + 0.5 * (tau * tf / 50.0).sin();
        let x1 = (tau * tf / 24.0).cos();
        let x2 = ((t * 7) % 13) as f64 / 13.0;
        writeln!(s, "{t},{y},{x1},{x2}").unwrap();
    }
    std::fs::write(path, s).unwrap();
}

/// Names of the ten irrelevant columns of the planted fixture.
pub fn noise_columns() -> Vec<String> {
    (1..=10).map(|k| format!("noise{k}")).collect()
}

/// `y_t = 0.6·y_{t−1} − 0.5·y_{t−2} + ε_t` with ten independent Gaussian
/// noise columns that carry no information about `y`.
pub fn write_planted_csv(path: &Path, rows: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut y = vec![0.0f64; rows + 50];
    for t in 2..y.len() {
        y[t] = 0.6 * y[t - 1] - 0.5 * y[t - 2] + normal.sample(&mut rng);
    }
    let mut s = String::from("t,y");
    for name in noise_columns() {
        write!(s, ",{name}").unwrap();
    }
    s.push('\n');
    for (t, v) in y[50..].iter().enumerate() {
        write!(s, "{t},{v}").unwrap();
        for _ in 0..10 {
            write!(s, ",{}", normal.sample(&mut rng)).unwrap();
        }
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

/// Small, fast configuration for pipeline tests.
pub fn small_config(data: &Path, target: &str, output: &Path) -> RunConfig {
    RunConfig {
        data: data.to_path_buf(),
        target: target.to_string(),
        partitions: 2,
        population_size: 10,
        generations: 10,
        forest_trees: 20,
        log_interval: 0,
        output: output.to_path_buf(),
        ..RunConfig::default()
    }
}
