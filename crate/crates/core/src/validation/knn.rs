use rayon::prelude::*;
use serde::Serialize;

use super::ValidationError;
use crate::metrics::squared_euclidean;

pub const DEFAULT_NEIGHBORS: usize = 15;

/// Binary classifier over feature rows.
pub trait Classifier: Sync {
    fn predict(&self, rows: &[Vec<f64>]) -> Vec<bool>;
}

/// Majority vote among the `k` nearest training rows (Euclidean). Equal
/// distances are ordered by training index; a tied vote predicts `false`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnnModel {
    pub k: usize,
    points: Vec<Vec<f64>>,
    labels: Vec<bool>,
}

pub fn knn_fit(
    points: Vec<Vec<f64>>,
    labels: Vec<bool>,
    k: usize,
) -> Result<KnnModel, ValidationError> {
    if points.is_empty() {
        return Err(ValidationError::Empty);
    }
    if points.len() != labels.len() {
        return Err(ValidationError::LengthMismatch(points.len(), labels.len()));
    }
    if k == 0 {
        return Err(ValidationError::InvalidNeighbors);
    }
    Ok(KnnModel { k, points, labels })
}

impl KnnModel {
    pub fn train_len(&self) -> usize {
        self.points.len()
    }

    fn predict_one(&self, query: &[f64]) -> bool {
        let k = self.k.min(self.points.len());
        // Sorted by (distance, index); insertion keeps it at size k.
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (i, p) in self.points.iter().enumerate() {
            let d = squared_euclidean(query, p);
            if best.len() == k && d >= best[k - 1].0 {
                continue;
            }
            let at = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(at, (d, i));
            best.truncate(k);
        }
        let positive = best.iter().filter(|&&(_, i)| self.labels[i]).count();
        2 * positive > k
    }
}

impl Classifier for KnnModel {
    fn predict(&self, rows: &[Vec<f64>]) -> Vec<bool> {
        rows.par_iter().map(|r| self.predict_one(r)).collect()
    }
}

pub fn knn_predict(model: &KnnModel, rows: &[Vec<f64>]) -> Vec<bool> {
    model.predict(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_neighbor_recalls_training_point() {
        let m = knn_fit(
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![false, true, false],
            1,
        )
        .unwrap();
        assert_eq!(
            m.predict(&[vec![1.0], vec![0.1], vec![1.9]]),
            vec![true, false, false]
        );
    }

    #[test]
    fn tie_goes_negative() {
        let m = knn_fit(vec![vec![0.0], vec![1.0]], vec![true, false], 2).unwrap();
        assert_eq!(m.predict(&[vec![0.4]]), vec![false]);
    }

    #[test]
    fn separable_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut draw = |n: usize| -> (Vec<Vec<f64>>, Vec<bool>) {
            (0..n)
                .map(|_| {
                    let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
                    let y = x[0] + x[1] > 1.0;
                    let shift = if y { 0.15 } else { -0.15 };
                    (vec![x[0] + shift, x[1] + shift, x[2]], y)
                })
                .unzip()
        };
        let (train, labels) = draw(500);
        let (test, truth) = draw(500);
        let m = knn_fit(train, labels, 5).unwrap();
        let pred = m.predict(&test);
        let correct = pred.iter().zip(&truth).filter(|(a, b)| a == b).count();
        assert!(correct as f64 / 500.0 >= 0.99, "{correct}");
    }

    #[test]
    fn constant_training_labels() {
        let m = knn_fit(vec![vec![0.0], vec![5.0], vec![9.0]], vec![true; 3], 15).unwrap();
        assert!(m.predict(&[vec![-3.0], vec![100.0]]).iter().all(|&p| p));
        assert!(knn_fit(vec![], vec![], 3).is_err());
    }
}
