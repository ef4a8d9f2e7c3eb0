use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::knn::{knn_fit, Classifier};
use super::ValidationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_predictions(predictions: &[bool], truth: &[bool]) -> Result<Self, ValidationError> {
        if predictions.len() != truth.len() {
            return Err(ValidationError::LengthMismatch(
                predictions.len(),
                truth.len(),
            ));
        }
        let mut c = Confusion::default();
        for (&p, &t) in predictions.iter().zip(truth) {
            match (p, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    /// `2TP / (2TP + FP + FN)`, with `0/0` taken as 0.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }
}

pub fn f1_score(predictions: &[bool], truth: &[bool]) -> Result<f64, ValidationError> {
    Ok(Confusion::from_predictions(predictions, truth)?.f1())
}

fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z =
        seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureImportance {
    pub feature: usize,
    /// Baseline F1 minus the mean F1 with this column shuffled.
    pub importance: f64,
    pub std: f64,
}

/// F1 drop when each column of `rows` is shuffled, averaged over `repeats`.
pub fn permutation_importance(
    model: &dyn Classifier,
    rows: &[Vec<f64>],
    truth: &[bool],
    repeats: usize,
    seed: u64,
) -> Result<Vec<FeatureImportance>, ValidationError> {
    if rows.len() != truth.len() {
        return Err(ValidationError::LengthMismatch(rows.len(), truth.len()));
    }
    if rows.is_empty() || repeats == 0 {
        return Err(ValidationError::Empty);
    }
    let baseline = f1_score(&model.predict(rows), truth)?;
    let d = rows[0].len();
    // Seeds depend on (feature, repeat) only, so the parallel map is
    // deterministic.
    let out = (0..d)
        .into_par_iter()
        .map(|feature| {
            let scores: Vec<f64> = (0..repeats)
                .map(|r| {
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(derive_seed(seed, feature as u64, r as u64));
                    let mut column: Vec<f64> = rows.iter().map(|row| row[feature]).collect();
                    column.shuffle(&mut rng);
                    let shuffled: Vec<Vec<f64>> = rows
                        .iter()
                        .zip(&column)
                        .map(|(row, &v)| {
                            let mut row = row.clone();
                            row[feature] = v;
                            row
                        })
                        .collect();
                    f1_score(&model.predict(&shuffled), truth).expect("lengths match")
                })
                .collect();
            let mean = scores.iter().sum::<f64>() / repeats as f64;
            let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / repeats as f64;
            FeatureImportance {
                feature,
                importance: baseline - mean,
                std: var.sqrt(),
            }
        })
        .collect();
    Ok(out)
}

/// Rows with binary labels, named for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub name: String,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl LabeledSet {
    pub fn new(name: impl Into<String>, rows: Vec<Vec<f64>>, labels: Vec<bool>) -> Self {
        Self {
            name: name.into(),
            rows,
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `size` rows drawn without replacement, kept in pool order.
    pub fn subsample(&self, size: usize, seed: u64) -> Result<LabeledSet, ValidationError> {
        if size == 0 || size > self.len() {
            return Err(ValidationError::SizeExceedsPool {
                size,
                pool: self.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picks = sample_indices(&mut rng, self.len(), size).into_vec();
        picks.sort_unstable();
        Ok(LabeledSet {
            name: self.name.clone(),
            rows: picks.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: picks.iter().map(|&i| self.labels[i]).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub size: usize,
    pub test_set: String,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub scores: Vec<f64>,
    /// Repeats whose subsample held a single class; they score 0.
    pub degenerate: usize,
}

/// k-NN scores on every test set for `repeats` random subsamples of each
/// size drawn from `pool`. A subsample with only one class scores 0.
pub fn learning_curve(
    pool: &LabeledSet,
    tests: &[LabeledSet],
    sizes: &[usize],
    repeats: usize,
    seed: u64,
    k_neighbors: usize,
) -> Result<Vec<CurvePoint>, ValidationError> {
    if tests.is_empty() {
        return Err(ValidationError::NoTestSets);
    }
    if repeats == 0 {
        return Err(ValidationError::Empty);
    }
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    if let Some(&size) = sizes.iter().find(|&&s| s > pool.len() || s == 0) {
        return Err(ValidationError::SizeExceedsPool {
            size,
            pool: pool.len(),
        });
    }
    let mut out = Vec::new();
    for &size in &sizes {
        out.extend(score_repeats(
            &[(pool, size)],
            tests,
            repeats,
            derive_seed(seed, size as u64, 0),
            k_neighbors,
        ));
    }
    Ok(out)
}

/// k-NN scores of models trained on blends of several pools: every repeat
/// draws `count` rows without replacement from each `(pool, count)` part
/// and trains on their union. One point per test set, sized by the total.
pub fn mixture_scores(
    parts: &[(&LabeledSet, usize)],
    tests: &[LabeledSet],
    repeats: usize,
    seed: u64,
    k_neighbors: usize,
) -> Result<Vec<CurvePoint>, ValidationError> {
    if tests.is_empty() {
        return Err(ValidationError::NoTestSets);
    }
    if repeats == 0 || parts.iter().all(|&(_, c)| c == 0) {
        return Err(ValidationError::Empty);
    }
    if let Some(&(pool, size)) = parts.iter().find(|(pool, c)| *c > pool.len()) {
        return Err(ValidationError::SizeExceedsPool {
            size,
            pool: pool.len(),
        });
    }
    Ok(score_repeats(parts, tests, repeats, seed, k_neighbors))
}

fn score_repeats(
    parts: &[(&LabeledSet, usize)],
    tests: &[LabeledSet],
    repeats: usize,
    seed: u64,
    k_neighbors: usize,
) -> Vec<CurvePoint> {
    let size: usize = parts.iter().map(|&(_, c)| c).sum();
    // runs[repeat] = (single class, score per test)
    let runs: Vec<(bool, Vec<f64>)> = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let mut rows = Vec::with_capacity(size);
            let mut labels = Vec::with_capacity(size);
            for (p, &(pool, count)) in parts.iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, p as u64, r as u64));
                let mut picks = sample_indices(&mut rng, pool.len(), count).into_vec();
                picks.sort_unstable();
                rows.extend(picks.iter().map(|&i| pool.rows[i].clone()));
                labels.extend(picks.iter().map(|&i| pool.labels[i]));
            }
            let single_class = labels.iter().all(|&l| l) || labels.iter().all(|&l| !l);
            if single_class {
                return (true, vec![0.0; tests.len()]);
            }
            let model = knn_fit(rows, labels, k_neighbors).expect("non-empty subsample");
            let scores = tests
                .iter()
                .map(|t| f1_score(&model.predict(&t.rows), &t.labels).expect("test set lengths"))
                .collect();
            (false, scores)
        })
        .collect();
    let degenerate = runs.iter().filter(|r| r.0).count();
    tests
        .iter()
        .enumerate()
        .map(|(t, test)| {
            let scores: Vec<f64> = runs.iter().map(|r| r.1[t]).collect();
            let mean = scores.iter().sum::<f64>() / repeats as f64;
            let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / repeats as f64;
            CurvePoint {
                size,
                test_set: test.name.clone(),
                mean_f1: mean,
                std_f1: var.sqrt(),
                scores,
                degenerate,
            }
        })
        .collect()
}

/// One-way ANOVA F statistic of each column grouped by the binary class.
/// NaN when a class is empty or the within-group variance vanishes.
pub fn anova_f(rows: &[Vec<f64>], labels: &[bool]) -> Result<Vec<f64>, ValidationError> {
    if rows.len() != labels.len() {
        return Err(ValidationError::LengthMismatch(rows.len(), labels.len()));
    }
    if rows.is_empty() {
        return Err(ValidationError::Empty);
    }
    let n = rows.len();
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = n - n_pos;
    let d = rows[0].len();
    Ok((0..d)
        .map(|j| {
            if n_pos == 0 || n_neg == 0 || n < 3 {
                return f64::NAN;
            }
            let (mut sp, mut sn) = (0.0, 0.0);
            for (r, &l) in rows.iter().zip(labels) {
                if l {
                    sp += r[j];
                } else {
                    sn += r[j];
                }
            }
            let (mp, mn) = (sp / n_pos as f64, sn / n_neg as f64);
            let grand = (sp + sn) / n as f64;
            let between = n_pos as f64 * (mp - grand).powi(2) + n_neg as f64 * (mn - grand).powi(2);
            let within: f64 = rows
                .iter()
                .zip(labels)
                .map(|(r, &l)| (r[j] - if l { mp } else { mn }).powi(2))
                .sum();
            if within == 0.0 {
                return f64::NAN;
            }
            between / (within / (n - 2) as f64)
        })
        .collect())
}
