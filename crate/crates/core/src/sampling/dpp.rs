use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{normalize_rows, SamplingError};
use crate::design_space::{DesignSpace, DesignVector};
use crate::metrics::{cosine_similarity, SimilarityKernel, SimilarityMatrix};

/// Added to the diagonal of every blended kernel.
pub const JITTER: f64 = 1e-10;
/// Eigenvalues (or greedy pivots) down to `-PSD_TOLERANCE` are treated as 0.
pub const PSD_TOLERANCE: f64 = 1e-8;
/// Above this many candidates the kernel is evaluated row by row during the
/// greedy pass instead of being materialized and eigendecomposed.
const DENSE_LIMIT: usize = 2000;

/// `L = (1 - weight) * L_design + weight * L_performance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelBlend {
    /// Applied to normalized design vectors.
    pub design: SimilarityKernel,
    /// Applied to standardized label vectors.
    pub performance: SimilarityKernel,
    pub weight: f64,
}

impl Default for KernelBlend {
    fn default() -> Self {
        Self {
            design: SimilarityKernel::Rbf,
            performance: SimilarityKernel::Rbf,
            weight: 0.0,
        }
    }
}

impl KernelBlend {
    pub fn design_only(kernel: SimilarityKernel) -> Self {
        Self {
            design: kernel,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SamplingError> {
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(SamplingError::InvalidWeight(self.weight));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdReport {
    /// Whether the full kernel was eigendecomposed.
    pub checked: bool,
    /// Smallest eigenvalue after jitter, when checked.
    pub min_eigenvalue: Option<f64>,
    /// Eigenvalues clipped to zero.
    pub clipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DppSelection {
    /// Distinct candidate indices in selection order.
    pub indices: Vec<usize>,
    pub psd: PsdReport,
}

/// Column-wise z-scores (population standard deviation); constant columns
/// become zero.
pub fn standardize_columns(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let n = rows.len() as f64;
    let stats: Vec<(f64, f64)> = (0..first.len())
        .map(|j| {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .collect();
    rows.iter()
        .map(|r| {
            r.iter()
                .zip(&stats)
                .map(|(x, &(mean, std))| if std > 0.0 { (x - mean) / std } else { 0.0 })
                .collect()
        })
        .collect()
}

fn pair(kernel: SimilarityKernel, a: &[f64], b: &[f64]) -> f64 {
    match kernel {
        SimilarityKernel::Rbf => {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (-0.5 * d2).exp()
        }
        SimilarityKernel::Cosine => cosine_similarity(a, b).unwrap_or(0.0),
    }
}

/// Greedy MAP inference for a DPP with incremental Cholesky updates.
///
/// `row(j)` returns column `j` of the kernel. Each step adds the candidate
/// with the largest remaining pivot (lowest index on ties). Pivots below
/// `-PSD_TOLERANCE` are reported as a non-PSD kernel.
fn greedy_by_rows(
    diagonal: Vec<f64>,
    row: impl Fn(usize) -> Vec<f64>,
    k: usize,
) -> Result<Vec<usize>, SamplingError> {
    let n = diagonal.len();
    if k > n {
        return Err(SamplingError::SubsetTooLarge { k, n });
    }
    let mut gains = diagonal;
    let mut factors: Vec<Vec<f64>> = vec![Vec::with_capacity(k); n];
    let mut taken = vec![false; n];
    let mut selected = Vec::with_capacity(k);
    while selected.len() < k {
        let mut best: Option<usize> = None;
        for i in (0..n).filter(|&i| !taken[i]) {
            if best.map_or(true, |b| gains[i] > gains[b]) {
                best = Some(i);
            }
        }
        let j = best.expect("k <= n leaves a candidate");
        if gains[j] < -PSD_TOLERANCE {
            return Err(SamplingError::NotPositiveSemidefinite {
                min_eigenvalue: gains[j],
            });
        }
        taken[j] = true;
        selected.push(j);
        if selected.len() == k {
            break;
        }
        let pivot = gains[j].max(0.0).sqrt();
        let column = row(j);
        let cj = factors[j].clone();
        for i in (0..n).filter(|&i| !taken[i]) {
            let e = if pivot > 1e-12 {
                let dot: f64 = cj.iter().zip(&factors[i]).map(|(a, b)| a * b).sum();
                (column[i] - dot) / pivot
            } else {
                0.0
            };
            factors[i].push(e);
            gains[i] -= e * e;
        }
    }
    Ok(selected)
}

/// Greedy MAP selection of `k` items on an explicit kernel (no jitter or
/// PSD repair applied).
pub fn greedy_map(kernel: &SimilarityMatrix, k: usize) -> Result<Vec<usize>, SamplingError> {
    let n = kernel.len();
    let diagonal = (0..n).map(|i| kernel.get(i, i)).collect();
    greedy_by_rows(diagonal, |j| (0..n).map(|i| kernel.get(i, j)).collect(), k)
}

/// Add jitter, then clip small negative eigenvalues (or fail on large ones).
fn repair(kernel: &mut SimilarityMatrix) -> Result<PsdReport, SamplingError> {
    let n = kernel.len();
    for i in 0..n {
        kernel.entries_mut()[i * n + i] += JITTER;
    }
    if n == 0 {
        return Ok(PsdReport {
            checked: true,
            min_eigenvalue: None,
            clipped: 0,
        });
    }
    let eigen = SymmetricEigen::new(DMatrix::from_row_slice(n, n, kernel.as_slice()));
    let min = eigen
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min < -PSD_TOLERANCE {
        return Err(SamplingError::NotPositiveSemidefinite {
            min_eigenvalue: min,
        });
    }
    let clipped = eigen.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    if clipped > 0 {
        let values = eigen.eigenvalues.map(|l| l.max(0.0));
        let v = &eigen.eigenvectors;
        let rebuilt = v * DMatrix::from_diagonal(&values) * v.transpose();
        for i in 0..n {
            for j in 0..n {
                // Symmetrize against rounding in the product.
                kernel.entries_mut()[i * n + j] = 0.5 * (rebuilt[(i, j)] + rebuilt[(j, i)]);
            }
        }
    }
    Ok(PsdReport {
        checked: true,
        min_eigenvalue: Some(min),
        clipped,
    })
}

/// Select `k` diverse candidates by greedy MAP on the blended kernel.
///
/// The design kernel sees normalized design vectors. When `blend.weight > 0`
/// the performance kernel sees `labels` after column standardization.
pub fn dpp_greedy_select(
    space: &DesignSpace,
    candidates: &[DesignVector],
    labels: Option<&[Vec<f64>]>,
    k: usize,
    blend: KernelBlend,
) -> Result<DppSelection, SamplingError> {
    blend.validate()?;
    let n = candidates.len();
    if k > n {
        return Err(SamplingError::SubsetTooLarge { k, n });
    }
    let design = normalize_rows(space, candidates)?;
    let performance = if blend.weight > 0.0 {
        let labels = labels.ok_or(SamplingError::MissingLabels {
            expected: n,
            actual: 0,
        })?;
        if labels.len() != n {
            return Err(SamplingError::MissingLabels {
                expected: n,
                actual: labels.len(),
            });
        }
        Some(standardize_columns(labels))
    } else {
        None
    };

    if n <= DENSE_LIMIT {
        let mut kernel = blend.design.matrix(&design);
        if let Some(perf) = &performance {
            kernel = kernel.blend(&blend.performance.matrix(perf), blend.weight);
        }
        let psd = repair(&mut kernel)?;
        let indices = greedy_map(&kernel, k)?;
        return Ok(DppSelection { indices, psd });
    }

    let w = blend.weight;
    let entry = |i: usize, j: usize| {
        let mut v = if i == j {
            1.0
        } else {
            pair(blend.design, &design[i], &design[j])
        };
        if let Some(perf) = &performance {
            let p = if i == j {
                1.0
            } else {
                pair(blend.performance, &perf[i], &perf[j])
            };
            v = (1.0 - w) * v + w * p;
        }
        if i == j {
            v + JITTER
        } else {
            v
        }
    };
    let diagonal = (0..n).map(|i| entry(i, i)).collect();
    let indices = greedy_by_rows(
        diagonal,
        |j| (0..n).into_par_iter().map(|i| entry(i, j)).collect(),
        k,
    )?;
    Ok(DppSelection {
        indices,
        psd: PsdReport {
            checked: false,
            min_eigenvalue: None,
            clipped: 0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::parse_space;
    use crate::metrics::dpp_log_det;
    use proptest::prelude::*;

    fn plane() -> DesignSpace {
        parse_space(
            "x | continuous | 0 | 10 | - | uniform |\ny | continuous | 0 | 10 | - | uniform |",
        )
        .unwrap()
    }

    fn rows(points: &[[f64; 2]]) -> Vec<DesignVector> {
        points.iter().map(|p| DesignVector(p.to_vec())).collect()
    }

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        (k - 1..n)
            .flat_map(|last| {
                subsets(last, k - 1).into_iter().map(move |mut s| {
                    s.push(last);
                    s
                })
            })
            .collect()
    }

    fn brute_force_best(kernel: &SimilarityMatrix, k: usize) -> f64 {
        subsets(kernel.len(), k)
            .iter()
            .map(|s| dpp_log_det(s, kernel).unwrap())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn coincident_pair_and_distant_point() {
        let cands = rows(&[[2.0, 2.0], [2.0, 2.0], [9.0, 9.0]]);
        let sel = dpp_greedy_select(&plane(), &cands, None, 2, KernelBlend::default()).unwrap();
        assert!(sel.indices.contains(&2));
        assert!(sel.indices.contains(&0) ^ sel.indices.contains(&1));
        // Oracle: the chosen pair attains the best determinant among all three pairs.
        let design: Vec<Vec<f64>> = cands
            .iter()
            .map(|r| plane().normalize(r).unwrap())
            .collect();
        let kernel = SimilarityKernel::Rbf.matrix(&design);
        let mut chosen = sel.indices.clone();
        chosen.sort();
        assert_eq!(
            dpp_log_det(&chosen, &kernel).unwrap(),
            brute_force_best(&kernel, 2)
        );
        assert!(sel.psd.checked);
    }

    #[test]
    fn full_subset_and_errors() {
        let cands = rows(&[[1.0, 1.0], [5.0, 2.0], [3.0, 8.0], [3.0, 8.0]]);
        let sel = dpp_greedy_select(&plane(), &cands, None, 4, KernelBlend::default()).unwrap();
        let mut all = sel.indices.clone();
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3]);
        assert!(dpp_greedy_select(&plane(), &cands, None, 5, KernelBlend::default()).is_err());
        let blend = KernelBlend {
            weight: 0.5,
            ..KernelBlend::default()
        };
        assert!(matches!(
            dpp_greedy_select(&plane(), &cands, None, 2, blend),
            Err(SamplingError::MissingLabels { .. })
        ));
        let bad = KernelBlend {
            weight: 1.5,
            ..KernelBlend::default()
        };
        assert!(dpp_greedy_select(&plane(), &cands, None, 2, bad).is_err());
    }

    #[test]
    fn blend_endpoints() {
        let cands = rows(&[
            [1.0, 1.0],
            [1.2, 1.1],
            [6.0, 2.0],
            [3.0, 9.0],
            [8.0, 8.0],
            [5.0, 5.0],
        ]);
        let labels: Vec<Vec<f64>> = vec![
            vec![0.8, 2.0],
            vec![0.1, 1.1],
            vec![0.79, 2.01],
            vec![0.5, 1.5],
            vec![0.81, 1.99],
            vec![0.3, 3.0],
        ];
        let design_only =
            dpp_greedy_select(&plane(), &cands, None, 3, KernelBlend::default()).unwrap();
        let w0 = KernelBlend::default();
        let at_zero = dpp_greedy_select(&plane(), &cands, Some(&labels), 3, w0).unwrap();
        assert_eq!(at_zero.indices, design_only.indices);

        let w1 = KernelBlend {
            weight: 1.0,
            ..KernelBlend::default()
        };
        let at_one = dpp_greedy_select(&plane(), &cands, Some(&labels), 3, w1).unwrap();
        let mut perf = SimilarityKernel::Rbf.matrix(&standardize_columns(&labels));
        repair(&mut perf).unwrap();
        assert_eq!(at_one.indices, greedy_map(&perf, 3).unwrap());
    }

    #[test]
    fn lazy_path_matches_dense_path() {
        let space = plane();
        let cands: Vec<DesignVector> = (0..DENSE_LIMIT + 50)
            .map(|i| {
                DesignVector(vec![
                    (i as f64 * 0.618).fract() * 10.0,
                    (i as f64 * 0.377).fract() * 10.0,
                ])
            })
            .collect();
        let lazy = dpp_greedy_select(&space, &cands, None, 10, KernelBlend::default()).unwrap();
        assert!(!lazy.psd.checked);
        let design: Vec<Vec<f64>> = cands.iter().map(|r| space.normalize(r).unwrap()).collect();
        let mut kernel = SimilarityKernel::Rbf.matrix(&design);
        let n = kernel.len();
        for i in 0..n {
            kernel.entries_mut()[i * n + i] += JITTER;
        }
        assert_eq!(lazy.indices, greedy_map(&kernel, 10).unwrap());
    }

    #[test]
    fn indefinite_kernel_is_rejected() {
        let mut m = SimilarityMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            repair(&mut m),
            Err(SamplingError::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn standardize_handles_constant_columns() {
        let z = standardize_columns(&[vec![1.0, 5.0], vec![3.0, 5.0]]);
        assert_eq!(z, vec![vec![-1.0, 0.0], vec![1.0, 0.0]]);
    }

    proptest! {
        #[test]
        fn greedy_is_near_optimal(
            points in prop::collection::vec(prop::collection::vec(-1.5..1.5f64, 3), 4..=12),
            k in 1usize..=4,
        ) {
            let kernel = SimilarityKernel::Rbf.matrix(&points);
            let chosen = greedy_map(&kernel, k).unwrap();
            let mut unique = chosen.clone();
            unique.sort();
            unique.dedup();
            prop_assert_eq!(unique.len(), k);
            let greedy = dpp_log_det(&chosen, &kernel).unwrap();
            let best = brute_force_best(&kernel, k);
            if best.is_finite() {
                let slack = (std::f64::consts::E / (std::f64::consts::E - 1.0)).ln() * k as f64;
                prop_assert!(greedy >= best - slack, "greedy {} best {}", greedy, best);
            }
        }
    }
}
