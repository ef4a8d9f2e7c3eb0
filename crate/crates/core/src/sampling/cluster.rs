use super::{normalize_rows, SamplingError};
use crate::design_space::{DesignSpace, DesignVector};
use crate::metrics::squared_euclidean;
use crate::validation::{kmeans, DEFAULT_MAX_ITER};

/// Pick `k` candidates spread over `n_clusters` k-means clusters of the
/// normalized designs.
///
/// Clusters are visited round-robin, each contributing its members in
/// order of distance to the centroid, so no cluster gives more than
/// `ceil(k / n_clusters)` picks while the others still have members left.
pub fn cluster_select(
    space: &DesignSpace,
    candidates: &[DesignVector],
    k: usize,
    n_clusters: usize,
    seed: u64,
) -> Result<Vec<usize>, SamplingError> {
    let n = candidates.len();
    if n == 0 {
        return Err(SamplingError::Empty);
    }
    if k > n {
        return Err(SamplingError::SubsetTooLarge { k, n });
    }
    if n_clusters == 0 || n_clusters > n || k < n_clusters {
        return Err(SamplingError::InvalidClusters {
            clusters: n_clusters,
            k,
            n,
        });
    }
    let unit = normalize_rows(space, candidates)?;
    let fit =
        kmeans(&unit, n_clusters, seed, DEFAULT_MAX_ITER).expect("cluster count checked above");
    let mut members: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n_clusters];
    for (i, (&c, u)) in fit.assignments.iter().zip(&unit).enumerate() {
        members[c].push((squared_euclidean(u, &fit.centroids[c]), i));
    }
    for m in &mut members {
        m.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }
    let mut picked = Vec::with_capacity(k);
    let mut rank = 0;
    while picked.len() < k {
        for m in &members {
            if let Some(&(_, i)) = m.get(rank) {
                picked.push(i);
                if picked.len() == k {
                    break;
                }
            }
        }
        rank += 1;
    }
    Ok(picked)
}
