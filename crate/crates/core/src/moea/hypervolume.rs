//! Exact hypervolume for minimisation problems.
//!
//! Uses the WFG recursion: the volume of a set is the sum of each point's
//! exclusive contribution, where a contribution is the point's own box minus
//! the volume of the remaining points clipped ("limited") to that box.
//! Two-dimensional sets are handled by a direct sweep.

use super::sorting::dominates;

/// Volume of the box spanned by `p` and the reference point.
fn box_volume(p: &[f64], reference: &[f64]) -> f64 {
    p.iter().zip(reference).map(|(x, r)| r - x).product()
}

fn strictly_inside(p: &[f64], reference: &[f64]) -> bool {
    p.iter().zip(reference).all(|(x, r)| x < r)
}

/// Removes dominated and duplicate points.
fn nondominated(mut points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    points.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    points.dedup();
    let keep: Vec<bool> = points
        .iter()
        .map(|p| !points.iter().any(|q| dominates(q, p)))
        .collect();
    points
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect()
}

fn sweep_2d(points: &mut [Vec<f64>], reference: &[f64]) -> f64 {
    points.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut volume = 0.0;
    let mut best_y = reference[1];
    for (k, p) in points.iter().enumerate() {
        best_y = best_y.min(p[1]);
        let next_x = points.get(k + 1).map_or(reference[0], |n| n[0]);
        volume += (next_x - p[0]) * (reference[1] - best_y);
    }
    volume
}

/// WFG over a nondominated set of points strictly inside the reference box.
fn wfg(mut points: Vec<Vec<f64>>, reference: &[f64]) -> f64 {
    match (points.len(), reference.len()) {
        (0, _) => 0.0,
        (1, _) => box_volume(&points[0], reference),
        (_, 1) => reference[0] - points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        (_, 2) => sweep_2d(&mut points, reference),
        _ => {
            // Descending in the last objective keeps limit sets small.
            let last = reference.len() - 1;
            points.sort_by(|a, b| b[last].total_cmp(&a[last]));
            (0..points.len())
                .map(|k| exclusive(&points[k], &points[k + 1..], reference))
                .sum()
        }
    }
}

/// Volume dominated by `p` and by none of `others`.
fn exclusive(p: &[f64], others: &[Vec<f64>], reference: &[f64]) -> f64 {
    let limited: Vec<Vec<f64>> = others
        .iter()
        .map(|q| q.iter().zip(p).map(|(a, b)| a.max(*b)).collect::<Vec<f64>>())
        .filter(|q| strictly_inside(q, reference))
        .collect();
    let shadow = wfg(nondominated(limited), reference);
    box_volume(p, reference) - shadow
}

/// Exact Lebesgue measure of the union of boxes `[p, reference]`.
///
/// Points that are not strictly better than the reference in every
/// objective contribute nothing and are dropped.
pub fn hypervolume<P: AsRef<[f64]>>(front: &[P], reference: &[f64]) -> f64 {
    let inside: Vec<Vec<f64>> = front
        .iter()
        .map(|p| p.as_ref())
        .filter(|p| p.len() == reference.len() && strictly_inside(p, reference))
        .map(<[f64]>::to_vec)
        .collect();
    wfg(nondominated(inside), reference)
}

/// Hypervolume gained by adding `p` to `others`, never negative.
pub fn exclusive_contribution<P: AsRef<[f64]>>(p: &[f64], others: &[P], reference: &[f64]) -> f64 {
    if !strictly_inside(p, reference) {
        return 0.0;
    }
    let others: Vec<Vec<f64>> = others
        .iter()
        .map(|q| q.as_ref())
        .filter(|q| strictly_inside(q, reference))
        .map(<[f64]>::to_vec)
        .collect();
    exclusive(p, &others, reference).max(0.0)
}
