//! Variation operators for mixed binary/real genomes: half uniform crossover
//! and bit flip on the mask, simulated binary crossover and polynomial
//! mutation on the weights.

use rand::seq::index::sample;
use rand::Rng;

use super::MoeaConfig;
use crate::lstm::Genome;

/// Parents closer than this are copied instead of recombined.
const SBX_EPSILON: f64 = 1e-14;

/// Half uniform crossover: swaps `⌊d/2⌋` of the `d` differing bits, chosen
/// uniformly without replacement.
pub fn hux<R: Rng + ?Sized>(a: &[bool], b: &[bool], rng: &mut R) -> (Vec<bool>, Vec<bool>) {
    let mut ca = a.to_vec();
    let mut cb = b.to_vec();
    let differing: Vec<usize> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
    let swaps = differing.len() / 2;
    if swaps > 0 {
        for k in sample(rng, differing.len(), swaps).into_iter() {
            let i = differing[k];
            std::mem::swap(&mut ca[i], &mut cb[i]);
        }
    }
    (ca, cb)
}

/// Spread factor of simulated binary crossover for a uniform draw `u ∈ [0,1)`.
fn sbx_beta(u: f64, eta: f64) -> f64 {
    let exponent = 1.0 / (eta + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(exponent)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(exponent)
    }
}

/// Simulated binary crossover of two scalars for a given uniform draw.
///
/// Children keep the parents' order: the first child sits on the first
/// parent's side of the midpoint. No clipping is applied.
pub fn sbx_pair(a: f64, b: f64, u: f64, eta: f64) -> (f64, f64) {
    let beta = sbx_beta(u, eta);
    let mid = 0.5 * (a + b);
    let half_spread = 0.5 * beta * (b - a).abs();
    let (low, high) = (mid - half_spread, mid + half_spread);
    if a <= b {
        (low, high)
    } else {
        (high, low)
    }
}

/// Bounded polynomial mutation of `y` for a given uniform draw.
pub fn polynomial_mutation(y: f64, u: f64, eta: f64, low: f64, high: f64) -> f64 {
    let span = high - low;
    let d1 = (y - low) / span;
    let d2 = (high - y) / span;
    let power = 1.0 / (eta + 1.0);
    let delta = if u < 0.5 {
        let xy = 1.0 - d1;
        let val = 2.0 * u + (1.0 - 2.0 * u) * xy.powf(eta + 1.0);
        val.powf(power) - 1.0
    } else {
        let xy = 1.0 - d2;
        let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy.powf(eta + 1.0);
        1.0 - val.powf(power)
    };
    (y + delta * span).clamp(low, high)
}

/// With probability `crossover_prob` recombines masks by HUX and weights by
/// SBX (clipped to the weight bounds); otherwise returns copies.
pub fn crossover<R: Rng + ?Sized>(a: &Genome, b: &Genome, config: &MoeaConfig, rng: &mut R) -> (Genome, Genome) {
    let mut ca = a.clone();
    let mut cb = b.clone();
    if !rng.random_bool(config.crossover_prob) {
        return (ca, cb);
    }
    let (lo, hi) = config.real_bounds;
    let (mask_a, mask_b) = hux(a.mask(), b.mask(), rng);
    {
        let (ma, wa) = ca.parts_mut();
        ma.copy_from_slice(&mask_a);
        let (mb, wb) = cb.parts_mut();
        mb.copy_from_slice(&mask_b);
        for i in 0..wa.len() {
            let (pa, pb) = (a.weights()[i], b.weights()[i]);
            if (pa - pb).abs() < SBX_EPSILON {
                continue;
            }
            let u: f64 = rng.random();
            let (x, y) = sbx_pair(pa, pb, u, config.sbx_eta);
            wa[i] = x.clamp(lo, hi);
            wb[i] = y.clamp(lo, hi);
        }
    }
    (ca, cb)
}

/// With probability `mutation_prob` flips each mask bit with probability `1/q`
/// and applies polynomial mutation to each weight with probability `1/z`.
pub fn mutate<R: Rng + ?Sized>(genome: &Genome, config: &MoeaConfig, rng: &mut R) -> Genome {
    let mut out = genome.clone();
    if !rng.random_bool(config.mutation_prob) {
        return out;
    }
    let (lo, hi) = config.real_bounds;
    let (mask, weights) = out.parts_mut();
    let bit_rate = 1.0 / mask.len() as f64;
    for bit in mask.iter_mut() {
        if rng.random_bool(bit_rate) {
            *bit = !*bit;
        }
    }
    let gene_rate = 1.0 / weights.len() as f64;
    for w in weights.iter_mut() {
        if rng.random_bool(gene_rate) {
            let u: f64 = rng.random();
            *w = polynomial_mutation(*w, u, config.pm_eta, lo, hi);
        }
    }
    out
}
