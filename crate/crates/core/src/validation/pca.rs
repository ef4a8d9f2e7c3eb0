use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::ValidationError;

/// Principal components of standardized data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaModel {
    /// Indices of the input columns used; constant columns are dropped.
    pub columns: Vec<usize>,
    pub dropped: Vec<usize>,
    pub mean: Vec<f64>,
    /// Sample standard deviation of each kept column.
    pub scale: Vec<f64>,
    /// Orthonormal rows over the kept columns.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

pub fn pca_fit(table: &[Vec<f64>], k: usize) -> Result<PcaModel, ValidationError> {
    let n = table.len();
    if n < 2 {
        return Err(ValidationError::TooFewRows { needed: 2, got: n });
    }
    let d = table[0].len();
    let mut columns = Vec::new();
    let mut dropped = Vec::new();
    let mut mean = Vec::new();
    let mut scale = Vec::new();
    for j in 0..d {
        let m = table.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = table.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        if var > 0.0 {
            columns.push(j);
            mean.push(m);
            scale.push(var.sqrt());
        } else {
            dropped.push(j);
        }
    }
    let p = columns.len();
    if k > p.min(n) || k == 0 {
        return Err(ValidationError::InvalidComponents { k, max: p.min(n) });
    }
    let z = DMatrix::from_fn(n, p, |i, c| (table[i][columns[c]] - mean[c]) / scale[c]);
    let cov = (z.transpose() * &z) / (n - 1) as f64;
    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .total_cmp(&eigen.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let total: f64 = eigen.eigenvalues.iter().map(|l| l.max(0.0)).sum();
    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let mut v: Vec<f64> = eigen.eigenvectors.column(idx).iter().copied().collect();
        let pivot = v
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(_, x)| x)
            .unwrap_or(1.0);
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        explained_variance.push(eigen.eigenvalues[idx].max(0.0));
    }
    let explained_variance_ratio = explained_variance
        .iter()
        .map(|v| if total > 0.0 { v / total } else { 0.0 })
        .collect();
    Ok(PcaModel {
        columns,
        dropped,
        mean,
        scale,
        components,
        explained_variance,
        explained_variance_ratio,
    })
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    fn standardize(&self, row: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .enumerate()
            .map(|(c, &j)| (row[j] - self.mean[c]) / self.scale[c])
            .collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                let z = self.standardize(r);
                self.components
                    .iter()
                    .map(|c| c.iter().zip(&z).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect()
    }

    /// Back-projection onto the kept columns, in original units.
    pub fn inverse_transform(&self, coords: &[Vec<f64>]) -> Vec<Vec<f64>> {
        coords
            .iter()
            .map(|t| {
                (0..self.columns.len())
                    .map(|c| {
                        let z: f64 = self
                            .components
                            .iter()
                            .zip(t)
                            .map(|(comp, s)| comp[c] * s)
                            .sum();
                        z * self.scale[c] + self.mean[c]
                    })
                    .collect()
            })
            .collect()
    }
}

/// Convenience: fit and project onto the first two components.
pub fn pca_2d(table: &[Vec<f64>]) -> Result<(PcaModel, Vec<[f64; 2]>), ValidationError> {
    let model = pca_fit(table, 2)?;
    let coords = model
        .transform(table)
        .into_iter()
        .map(|v| [v[0], v[1]])
        .collect();
    Ok((model, coords))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn sample(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Normal::new(0.0, 1.0).unwrap();
        (0..n)
            .map(|_| {
                let (a, b, c) = (z.sample(&mut rng), z.sample(&mut rng), z.sample(&mut rng));
                vec![a, 0.5 * a + b, c - a, 2.0 * b + 0.1 * c]
            })
            .collect()
    }

    #[test]
    fn rank_one_data() {
        let t: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let s = i as f64 * 0.3 - 2.0;
                vec![s, 2.0 * s + 1.0, -s]
            })
            .collect();
        let m = pca_fit(&t, 1).unwrap();
        assert!(m.explained_variance_ratio[0] >= 1.0 - 1e-9);
    }

    #[test]
    fn components_are_orthonormal_and_ordered() {
        let t = sample(300, 1);
        let m = pca_fit(&t, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let dot: f64 = m.components[i]
                    .iter()
                    .zip(&m.components[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-9);
            }
            let c = &m.components[i];
            let big = c
                .iter()
                .copied()
                .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            assert!(big > 0.0);
        }
        for w in m.explained_variance.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(m.explained_variance_ratio.iter().sum::<f64>() <= 1.0 + 1e-9);
        // Full rank reconstructs the data.
        let back = m.inverse_transform(&m.transform(&t));
        for (r, b) in t.iter().zip(&back) {
            for (x, y) in r.iter().zip(b) {
                assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0));
            }
        }
        let origin = m.transform(std::slice::from_ref(&m.mean));
        assert!(origin[0].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn anisotropic_order_matches_direct_variance() {
        // Independent columns with variances 9 and 1 after standardization
        // become isotropic, so compare on already-standardized correlated data.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = Normal::new(0.0, 1.0).unwrap();
        let t: Vec<Vec<f64>> = (0..2000)
            .map(|_| {
                let (a, b) = (z.sample(&mut rng), z.sample(&mut rng));
                vec![3.0 * a + 0.2 * b, 2.9 * a - 0.3 * b]
            })
            .collect();
        let m = pca_fit(&t, 2).unwrap();
        // Oracle: closed-form eigenvalues 1 +- r of a 2x2 correlation matrix.
        let n = t.len() as f64;
        let mean = |j: usize| t.iter().map(|r| r[j]).sum::<f64>() / n;
        let (m0, m1) = (mean(0), mean(1));
        let sxy: f64 = t.iter().map(|r| (r[0] - m0) * (r[1] - m1)).sum();
        let sxx: f64 = t.iter().map(|r| (r[0] - m0).powi(2)).sum();
        let syy: f64 = t.iter().map(|r| (r[1] - m1).powi(2)).sum();
        let r = sxy / (sxx * syy).sqrt();
        assert!((m.explained_variance[0] - (1.0 + r.abs())).abs() < 1e-9);
        assert!((m.explained_variance[1] - (1.0 - r.abs())).abs() < 1e-9);
        // Projection variance follows the same order.
        let proj = m.transform(&t);
        let var = |k: usize| proj.iter().map(|p| p[k] * p[k]).sum::<f64>() / (n - 1.0);
        assert!(var(0) > var(1));
    }

    #[test]
    fn drops_constant_columns() {
        let t: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64, 5.0, (i * i) as f64])
            .collect();
        let m = pca_fit(&t, 2).unwrap();
        assert_eq!(m.dropped, vec![1]);
        assert!(pca_fit(&t, 3).is_err());
        assert!(pca_fit(&t[..1], 1).is_err());
    }
}
