use rand::seq::index;
use rand::Rng;

use crate::data::InitMethod;
use crate::rng::StreamRng;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Initial centers for one restart, drawn from the rows of `x` (`n x p`).
pub(crate) fn seed_centers(
    x: &[f64],
    p: usize,
    k: usize,
    method: InitMethod,
    rng: &mut StreamRng,
) -> Vec<Vec<f64>> {
    let n = x.len() / p;
    let row = |i: usize| x[i * p..(i + 1) * p].to_vec();
    match method {
        InitMethod::RandomRows => index::sample(rng, n, k).into_iter().map(row).collect(),
        InitMethod::KmeansPlusPlus => {
            let mut centers = vec![row(rng.random_range(0..n))];
            let mut best: Vec<f64> = (0..n)
                .map(|i| sq_dist(&x[i * p..(i + 1) * p], &centers[0]))
                .collect();
            while centers.len() < k {
                let total: f64 = best.iter().sum();
                let pick = if total > 0.0 {
                    let mut target = rng.random::<f64>() * total;
                    let mut chosen = n - 1;
                    for (i, &w) in best.iter().enumerate() {
                        if target < w {
                            chosen = i;
                            break;
                        }
                        target -= w;
                    }
                    chosen
                } else {
                    rng.random_range(0..n)
                };
                let c = row(pick);
                for (i, b) in best.iter_mut().enumerate() {
                    *b = b.min(sq_dist(&x[i * p..(i + 1) * p], &c));
                }
                centers.push(c);
            }
            centers
        }
    }
}

/// Moves one row into every empty cluster: the row with the largest current
/// distance to its own center, taken from a cluster with more than one row.
/// Ties go to the lowest row index. Returns whether anything moved.
pub(crate) fn repair_empty(labels: &mut [usize], dist: &mut [f64], counts: &mut [usize]) -> bool {
    let mut moved = false;
    for empty in 0..counts.len() {
        if counts[empty] > 0 {
            continue;
        }
        let mut pick: Option<usize> = None;
        for i in 0..labels.len() {
            if counts[labels[i]] > 1 && pick.is_none_or(|b| dist[i] > dist[b]) {
                pick = Some(i);
            }
        }
        let Some(i) = pick else { break };
        counts[labels[i]] -= 1;
        counts[empty] += 1;
        labels[i] = empty;
        dist[i] = 0.0;
        moved = true;
    }
    moved
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn random_rows_are_distinct() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let centers = seed_centers(&x, 2, 5, InitMethod::RandomRows, &mut stream(3, &[]));
        let mut firsts: Vec<i64> = centers.iter().map(|c| c[0] as i64).collect();
        firsts.sort();
        firsts.dedup();
        assert_eq!(firsts.len(), 5);
    }

    #[test]
    fn plus_plus_returns_k_rows() {
        let x = vec![0.0, 0.0, 0.0, 10.0, 10.0, 10.0];
        let c = seed_centers(&x, 1, 3, InitMethod::KmeansPlusPlus, &mut stream(1, &[]));
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn repair_takes_farthest_point() {
        let mut labels = vec![0, 0, 0, 1];
        let mut dist = vec![1.0, 5.0, 5.0, 0.0];
        let mut counts = vec![3, 1, 0];
        assert!(repair_empty(&mut labels, &mut dist, &mut counts));
        assert_eq!(labels, vec![0, 2, 0, 1]);
        assert_eq!(counts, vec![2, 1, 1]);
    }
}
