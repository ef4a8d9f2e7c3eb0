use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Euclidean,
    Manhattan,
}

pub fn distance(a: &[f64], b: &[f64], kind: DistanceKind) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    Ok(match kind {
        DistanceKind::Euclidean => squared_euclidean(a, b).sqrt(),
        DistanceKind::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
    })
}

#[inline]
pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `exp(-0.5 * d^2)` with `d` the Euclidean distance.
pub fn rbf_similarity(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    Ok((-0.5 * squared_euclidean(a, b)).exp())
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(MetricError::ZeroVector);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Symmetric similarity matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SimilarityMatrix {
    /// Build from a symmetric pairwise function; only the upper triangle is
    /// evaluated and mirrored, so the result is exactly symmetric.
    pub fn from_pairwise(n: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (i..n).map(|j| f(i, j)).collect())
            .collect();
        let mut entries = vec![0.0; n * n];
        for (i, row) in rows.into_iter().enumerate() {
            for (offset, value) in row.into_iter().enumerate() {
                let j = i + offset;
                entries[i * n + j] = value;
                entries[j * n + i] = value;
            }
        }
        Self { n, entries }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let entries = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self { n, entries }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_symmetric(&self, tolerance: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tolerance))
    }

    /// `(1 - w) * self + w * other`.
    pub fn blend(&self, other: &SimilarityMatrix, w: f64) -> SimilarityMatrix {
        assert_eq!(self.n, other.n, "blended kernels must have the same size");
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect();
        SimilarityMatrix { n: self.n, entries }
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }
}

/// Similarity-matrix producers for DPP kernels. Both yield unit-diagonal
/// positive semidefinite matrices (up to rounding).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityKernel {
    #[default]
    Rbf,
    Cosine,
}

impl SimilarityKernel {
    /// Pairwise similarities over `points`. Zero vectors under the cosine
    /// kernel are treated as orthogonal to everything but themselves.
    pub fn matrix(self, points: &[Vec<f64>]) -> SimilarityMatrix {
        match self {
            SimilarityKernel::Rbf => SimilarityMatrix::from_pairwise(points.len(), |i, j| {
                if i == j {
                    1.0
                } else {
                    (-0.5 * squared_euclidean(&points[i], &points[j])).exp()
                }
            }),
            SimilarityKernel::Cosine => SimilarityMatrix::from_pairwise(points.len(), |i, j| {
                if i == j {
                    1.0
                } else {
                    cosine_similarity(&points[i], &points[j]).unwrap_or(0.0)
                }
            }),
        }
    }
}

/// Log-determinant of the principal submatrix of `kernel` on `subset`.
///
/// Singular (or numerically non-positive-definite) submatrices return
/// `f64::NEG_INFINITY`. The empty subset has determinant 1.
pub fn dpp_log_det(subset: &[usize], kernel: &SimilarityMatrix) -> Result<f64, MetricError> {
    if let Some(&index) = subset.iter().find(|&&i| i >= kernel.len()) {
        return Err(MetricError::IndexOutOfRange {
            index,
            size: kernel.len(),
        });
    }
    let k = subset.len();
    let mut lower = vec![0.0; k * k];
    let mut log_det = 0.0;
    for i in 0..k {
        for j in 0..=i {
            let mut sum = kernel.get(subset[i], subset[j]);
            for p in 0..j {
                sum -= lower[i * k + p] * lower[j * k + p];
            }
            if i == j {
                let scale = kernel.get(subset[i], subset[i]).abs().max(1.0);
                if sum <= 1e-12 * scale {
                    return Ok(f64::NEG_INFINITY);
                }
                let pivot = sum.sqrt();
                lower[i * k + i] = pivot;
                log_det += 2.0 * pivot.ln();
            } else {
                lower[i * k + j] = sum / lower[j * k + j];
            }
        }
    }
    Ok(log_det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn distances() {
        let a = [0.0, 0.0];
        let b = [3.0, 4.0];
        assert_eq!(distance(&a, &a, DistanceKind::Euclidean).unwrap(), 0.0);
        assert_eq!(distance(&a, &b, DistanceKind::Euclidean).unwrap(), 5.0);
        assert_eq!(distance(&a, &b, DistanceKind::Manhattan).unwrap(), 7.0);
        assert_eq!(
            distance(&a, &[1.0], DistanceKind::Euclidean),
            Err(MetricError::LengthMismatch(2, 1))
        );
    }

    #[test]
    fn rbf_values() {
        assert_eq!(rbf_similarity(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        let s = rbf_similarity(&[0.0], &[1.0]).unwrap();
        assert!((s - (-0.5f64).exp()).abs() < 1e-12);
        assert_relative_eq!(s, 0.60653, epsilon = 1e-5);
        let mut last = 1.0;
        for d in [0.5, 1.0, 2.0, 4.0, 8.0, 40.0] {
            let s = rbf_similarity(&[0.0], &[d]).unwrap();
            assert!(s < last);
            last = s;
        }
        assert!(last < 1e-300);
    }

    #[test]
    fn cosine_values() {
        let a = [1.0, 2.0, 3.0];
        assert_relative_eq!(cosine_similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 0.0);
        assert_relative_eq!(cosine_similarity(&a, &[-1.0, -2.0, -3.0]).unwrap(), -1.0);
        assert_eq!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(MetricError::ZeroVector)
        );
    }

    fn det3(m: [[f64; 3]; 3]) -> f64 {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    #[test]
    fn log_det_matches_cofactor_expansion() {
        let points = vec![vec![0.0, 0.0], vec![0.7, 0.2], vec![-0.4, 1.1]];
        let kernel = SimilarityKernel::Rbf.matrix(&points);
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (-0.5 * squared_euclidean(&points[i], &points[j])).exp();
            }
        }
        let expected = det3(m).ln();
        assert_relative_eq!(
            dpp_log_det(&[0, 1, 2], &kernel).unwrap(),
            expected,
            epsilon = 1e-12
        );
        assert_eq!(dpp_log_det(&[1], &kernel).unwrap(), 0.0);
        assert_eq!(dpp_log_det(&[], &kernel).unwrap(), 0.0);
        assert!(dpp_log_det(&[3], &kernel).is_err());
    }

    #[test]
    fn log_det_singular_sentinel() {
        let points = vec![vec![0.3, 0.3], vec![0.3, 0.3]];
        let kernel = SimilarityKernel::Rbf.matrix(&points);
        assert_eq!(dpp_log_det(&[0, 1], &kernel).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn kernels_are_symmetric_unit_diagonal() {
        let points: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()])
            .collect();
        for kernel in [SimilarityKernel::Rbf, SimilarityKernel::Cosine] {
            let m = kernel.matrix(&points);
            assert!(m.is_symmetric(1e-12));
            for i in 0..m.len() {
                assert_eq!(m.get(i, i), 1.0);
                for j in 0..m.len() {
                    assert!(m.get(i, j) <= 1.0 && m.get(i, j) >= -1.0);
                }
            }
        }
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0..100.0f64, 3)
    }

    proptest! {
        #[test]
        fn metric_axioms(a in vec3(), b in vec3(), c in vec3()) {
            for kind in [DistanceKind::Euclidean, DistanceKind::Manhattan] {
                let ab = distance(&a, &b, kind).unwrap();
                let ba = distance(&b, &a, kind).unwrap();
                let bc = distance(&b, &c, kind).unwrap();
                let ac = distance(&a, &c, kind).unwrap();
                prop_assert!(ab >= 0.0);
                prop_assert_eq!(ab, ba);
                prop_assert_eq!(distance(&a, &a, kind).unwrap(), 0.0);
                prop_assert!(ac <= ab + bc + 1e-9 * (1.0 + ac));
            }
        }

        #[test]
        fn principal_log_dets_are_nonpositive(points in prop::collection::vec(vec3(), 1..8)) {
            let kernel = SimilarityKernel::Rbf.matrix(&points);
            let subset: Vec<usize> = (0..points.len()).collect();
            let value = dpp_log_det(&subset, &kernel).unwrap();
            prop_assert!(value <= 1e-9);
        }
    }
}
