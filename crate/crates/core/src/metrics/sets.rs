use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distance::squared_euclidean;
use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetDistanceKind {
    /// Largest nearest-neighbor distance in either direction.
    Hausdorff,
    /// Mean nearest-neighbor distance from A to B plus from B to A, halved.
    Chamfer,
}

fn directed_nearest(from: &[Vec<f64>], to: &[Vec<f64>]) -> Vec<f64> {
    from.par_iter()
        .map(|a| {
            to.iter()
                .map(|b| squared_euclidean(a, b))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

pub fn set_distance(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    kind: SetDistanceKind,
) -> Result<f64, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let dim = a[0].len();
    if let Some(p) = a.iter().chain(b).find(|p| p.len() != dim) {
        return Err(MetricError::LengthMismatch(dim, p.len()));
    }
    let ab = directed_nearest(a, b);
    let ba = directed_nearest(b, a);
    Ok(match kind {
        SetDistanceKind::Hausdorff => ab.iter().chain(&ba).copied().fold(0.0, f64::max),
        SetDistanceKind::Chamfer => {
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            (mean(&ab) + mean(&ba)) / 2.0
        }
    })
}
