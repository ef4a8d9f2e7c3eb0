use serde::{Deserialize, Serialize};

use super::ValidationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    Pearson,
    Spearman,
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Column correlation matrix of a row-major table. Pairs involving a
/// constant column are NaN, including that column's diagonal entry.
pub fn correlation(
    table: &[Vec<f64>],
    kind: CorrelationKind,
) -> Result<Vec<Vec<f64>>, ValidationError> {
    if table.len() < 2 {
        return Err(ValidationError::TooFewRows {
            needed: 2,
            got: table.len(),
        });
    }
    let d = table[0].len();
    let mut columns: Vec<Vec<f64>> = (0..d)
        .map(|j| table.iter().map(|r| r[j]).collect())
        .collect();
    if kind == CorrelationKind::Spearman {
        columns = columns.iter().map(|c| fractional_ranks(c)).collect();
    }
    let mut m = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i..d {
            let r = if i == j {
                if pearson(&columns[i], &columns[i]).is_nan() {
                    f64::NAN
                } else {
                    1.0
                }
            } else {
                pearson(&columns[i], &columns[j])
            };
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    Ok(m)
}
