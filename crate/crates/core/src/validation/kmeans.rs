use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::ValidationError;
use crate::metrics::squared_euclidean as sq;

pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus(table: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = table.len();
    let mut centroids = vec![table[rng.random_range(0..n)].clone()];
    let mut closest: Vec<f64> = table.par_iter().map(|p| sq(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in closest.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // Every point coincides with a centroid already.
            rng.random_range(0..n)
        };
        let c = table[pick].clone();
        closest
            .par_iter_mut()
            .zip(table.par_iter())
            .for_each(|(d, p)| *d = d.min(sq(p, &c)));
        centroids.push(c);
    }
    centroids
}

/// Lloyd's algorithm from a seeded k-means++ start. Stops at an assignment
/// fixpoint or after `max_iter` rounds; an emptied cluster is moved onto the
/// point farthest from its own centroid.
pub fn kmeans(
    table: &[Vec<f64>],
    n_clusters: usize,
    seed: u64,
    max_iter: usize,
) -> Result<KMeansResult, ValidationError> {
    let n = table.len();
    if n == 0 {
        return Err(ValidationError::Empty);
    }
    if n_clusters == 0 || n_clusters > n {
        return Err(ValidationError::InvalidClusterCount { k: n_clusters, n });
    }
    let dim = table[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus(table, n_clusters, &mut rng);
    let mut assignments: Vec<usize> = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let step: Vec<(usize, f64)> = table.par_iter().map(|p| nearest(p, &centroids)).collect();
        let mut new_assign: Vec<usize> = step.iter().map(|s| s.0).collect();
        let mut dists: Vec<f64> = step.iter().map(|s| s.1).collect();

        // Reseed empty clusters.
        let mut counts = vec![0usize; n_clusters];
        for &a in &new_assign {
            counts[a] += 1;
        }
        for c in 0..n_clusters {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[new_assign[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                counts[new_assign[i]] -= 1;
                counts[c] = 1;
                centroids[c] = table[i].clone();
                new_assign[i] = c;
                dists[i] = 0.0;
            }
        }

        history.push(dists.iter().sum());
        let converged = new_assign == assignments;
        assignments = new_assign;
        iterations += 1;
        if converged || iterations >= max_iter {
            break;
        }

        let mut sums = vec![vec![0.0; dim]; n_clusters];
        for (p, &a) in table.iter().zip(&assignments) {
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for (c, sum) in sums.into_iter().enumerate() {
            if counts[c] > 0 {
                centroids[c] = sum.into_iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let inertia = table
        .iter()
        .zip(&assignments)
        .map(|(p, &a)| sq(p, &centroids[a]))
        .sum();
    Ok(KMeansResult {
        assignments,
        centroids,
        inertia,
        inertia_history: history,
        iterations,
    })
}
