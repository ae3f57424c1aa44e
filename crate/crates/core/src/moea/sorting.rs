use crate::error::{Error, Result};

/// Strict Pareto dominance for minimisation: `a` is no worse everywhere and
/// better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly_better = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly_better = true;
        }
    }
    strictly_better
}

/// Fast nondominated sort. Returns index lists, front 0 first; indices inside
/// a front are ascending.
pub fn nondominated_sort<P: AsRef<[f64]>>(points: &[P]) -> Result<Vec<Vec<usize>>> {
    let n = points.len();
    if let Some(first) = points.first() {
        let dim = first.as_ref().len();
        if let Some(bad) = points.iter().position(|p| p.as_ref().len() != dim) {
            return Err(Error::usage(format!(
                "objective vector {bad} has {} entries, expected {dim}",
                points[bad].as_ref().len()
            )));
        }
    }

    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (points[i].as_ref(), points[j].as_ref());
            if dominates(a, b) {
                dominated_by_me[i].push(j);
                domination_count[j] += 1;
            } else if dominates(b, a) {
                dominated_by_me[j].push(i);
                domination_count[i] += 1;
            }
        }
    }

    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    Ok(fronts)
}

/// Crowding distance of each member of one front.
///
/// For every objective the extreme members get `+∞`; interior members add the
/// gap between their neighbours divided by the objective's range. An
/// objective whose range is zero contributes nothing to any member.
pub fn crowding_distance<P: AsRef<[f64]>>(front: &[P]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n == 0 {
        return dist;
    }
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let dims = front[0].as_ref().len();
    let mut order: Vec<usize> = (0..n).collect();
    for m in 0..dims {
        let value = |i: usize| front[i].as_ref()[m];
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
        let range = value(order[n - 1]) - value(order[0]);
        if range <= 0.0 {
            continue;
        }
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        for k in 1..n - 1 {
            let gap = value(order[k + 1]) - value(order[k - 1]);
            dist[order[k]] += gap / range;
        }
    }
    dist
}
