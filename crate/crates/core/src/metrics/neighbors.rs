use rayon::prelude::*;
use serde::Serialize;

use super::distance::squared_euclidean;
use super::MetricError;

/// Above this many points the search switches from all-pairs to a sweep
/// along the widest axis. Both are exact.
const BRUTE_FORCE_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NnStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Euclidean distance from each point to its nearest other point.
pub fn nearest_neighbor_distances(points: &[Vec<f64>]) -> Result<Vec<f64>, MetricError> {
    if points.len() < 2 {
        return Err(MetricError::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(MetricError::LengthMismatch(dim, p.len()));
    }
    if points.len() <= BRUTE_FORCE_LIMIT || dim == 0 {
        Ok(brute_force(points))
    } else {
        Ok(sweep(points))
    }
}

fn brute_force(points: &[Vec<f64>]) -> Vec<f64> {
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| squared_euclidean(&points[i], q))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

fn sweep(points: &[Vec<f64>]) -> Vec<f64> {
    let dim = points[0].len();
    let spread = |axis: usize| {
        let (lo, hi) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p[axis]), hi.max(p[axis]))
            });
        hi - lo
    };
    let axis = (0..dim)
        .max_by(|&a, &b| spread(a).total_cmp(&spread(b)))
        .unwrap_or(0);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let keys: Vec<f64> = order.iter().map(|&i| points[i][axis]).collect();

    let mut result = vec![0.0; points.len()];
    let found: Vec<(usize, f64)> = (0..order.len())
        .into_par_iter()
        .map(|rank| {
            let p = &points[order[rank]];
            let mut best = f64::INFINITY;
            let mut up = rank + 1;
            let mut down = rank;
            loop {
                let up_gap = keys.get(up).map(|k| k - keys[rank]);
                let down_gap = if down > 0 {
                    Some(keys[rank] - keys[down - 1])
                } else {
                    None
                };
                let next = match (up_gap, down_gap) {
                    (Some(u), Some(d)) => Some(if u <= d { (true, u) } else { (false, d) }),
                    (Some(u), None) => Some((true, u)),
                    (None, Some(d)) => Some((false, d)),
                    (None, None) => None,
                };
                let Some((going_up, gap)) = next else { break };
                if gap * gap >= best {
                    break;
                }
                let other = if going_up {
                    up += 1;
                    up - 1
                } else {
                    down -= 1;
                    down
                };
                best = best.min(squared_euclidean(p, &points[order[other]]));
            }
            (order[rank], best.sqrt())
        })
        .collect();
    for (i, d) in found {
        result[i] = d;
    }
    result
}

pub fn nn_distance_stats(points: &[Vec<f64>]) -> Result<NnStats, MetricError> {
    let d = nearest_neighbor_distances(points)?;
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(NnStats {
        mean,
        std: var.sqrt(),
        min: d.iter().copied().fold(f64::INFINITY, f64::min),
        max: d.iter().copied().fold(0.0, f64::max),
    })
}
