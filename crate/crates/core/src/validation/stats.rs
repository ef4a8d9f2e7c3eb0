use serde::Serialize;

use super::ValidationError;

pub const DEFAULT_HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `counts.len() + 1` edges; the last bin is closed on the right.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnStats {
    pub name: String,
    pub count: usize,
    pub mean: f64,
    /// Population variance (divides by `count`).
    pub variance: f64,
    /// Lower middle element when `count` is even.
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: Histogram,
}

/// Quantile of sorted data by linear interpolation between order
/// statistics at position `(n - 1) * p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Histogram {
    let bins = bins.max(1);
    let width = if hi > lo {
        (hi - lo) / bins as f64
    } else {
        0.0
    };
    let edges = (0..=bins)
        .map(|i| {
            if width > 0.0 {
                lo + i as f64 * width
            } else {
                lo
            }
        })
        .collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let k = if width > 0.0 {
            (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1)
        } else {
            0
        };
        counts[k] += 1;
    }
    Histogram { edges, counts }
}

pub fn describe_column(
    name: &str,
    values: &[f64],
    bins: usize,
) -> Result<ColumnStats, ValidationError> {
    if values.is_empty() {
        return Err(ValidationError::Empty);
    }
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / n as f64;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let (min, max) = (sorted[0], sorted[n - 1]);
    Ok(ColumnStats {
        name: name.to_string(),
        count: n,
        mean,
        variance,
        median: sorted[(n - 1) / 2],
        q1,
        q3,
        iqr: q3 - q1,
        min,
        max,
        histogram: histogram(values, bins, min, max),
    })
}

/// Statistics for every column of a row-major table.
pub fn descriptive_stats(
    names: &[String],
    table: &[Vec<f64>],
) -> Result<Vec<ColumnStats>, ValidationError> {
    if table.is_empty() {
        return Err(ValidationError::Empty);
    }
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let column: Vec<f64> = table.iter().map(|r| r[j]).collect();
            describe_column(name, &column, DEFAULT_HISTOGRAM_BINS)
        })
        .collect()
}
