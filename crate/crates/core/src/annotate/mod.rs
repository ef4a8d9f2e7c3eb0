//! Labeling of design vectors through pluggable evaluators, the on-disk
//! dataset format, and the bundled compressor mean-line evaluator.

mod compressor;
mod dataset;
mod fluid;

use std::collections::BTreeMap;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design_space::{DesignSpace, SpaceError};

pub use compressor::{
    CompressorEvaluator, LossBreakdown, OperatingPoint, CHOKE_MACH, COMPRESSOR_EVALUATOR_ID,
    K_BACKFACE, K_CLEARANCE, K_DIFFUSER, K_FRICTION, K_INCIDENCE, K_MIXING, SURGE_FLOW_ANGLE_DEG,
    SURGE_FLOW_COEFFICIENT,
};
pub use dataset::{sidecar_path, Dataset, Provenance, Segment, SplitTag, LABEL_COLUMNS};
pub use fluid::{fluid_by_name, fluids, Antoine, Fluid, DEFAULT_P_REF_KPA, FLUID_NAMES};

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("evaluator `{evaluator}` does not accept this space: {reason}")]
    SpaceMismatch { evaluator: String, reason: String },
    #[error("unknown evaluator `{0}` (available: {available})", available = evaluator_ids().join(", "))]
    UnknownEvaluator(String),
    #[error("dataset has no labels")]
    MissingLabels,
    #[error("worker count must be positive")]
    InvalidWorkers,
    #[error("{context}: {message}")]
    Format { context: String, message: String },
    #[error("datasets cannot be combined: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AnnotateError {
    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        AnnotateError::Format {
            context: context.into(),
            message: message.into(),
        }
    }
}

/// Why a design does not work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorCode {
    Choke,
    Surge,
    Condensation,
    /// Non-physical or non-finite result, or an evaluator failure.
    Numerical,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 4] = [
        ErrorCode::Choke,
        ErrorCode::Surge,
        ErrorCode::Condensation,
        ErrorCode::Numerical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Choke => "choke",
            ErrorCode::Surge => "surge",
            ErrorCode::Condensation => "condensation",
            ErrorCode::Numerical => "numerical",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorCode::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown error code `{s}`"))
    }
}

/// Annotation of one design. Non-working designs carry `eta_tt = 0` and
/// `pr_tt = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub working: bool,
    pub eta_tt: f64,
    pub pr_tt: f64,
    pub error: Option<ErrorCode>,
}

impl Labels {
    pub fn working(eta_tt: f64, pr_tt: f64) -> Self {
        Labels {
            working: true,
            eta_tt,
            pr_tt,
            error: None,
        }
    }

    pub fn failed(code: ErrorCode) -> Self {
        Labels {
            working: false,
            eta_tt: 0.0,
            pr_tt: 1.0,
            error: Some(code),
        }
    }

    /// Whether the record satisfies the range and sentinel rules.
    pub fn is_consistent(&self) -> bool {
        if self.working {
            self.error.is_none() && self.eta_tt > 0.0 && self.eta_tt <= 1.0 && self.pr_tt > 1.0
        } else {
            self.eta_tt == 0.0 && self.pr_tt == 1.0
        }
    }
}

/// A labeling function over design vectors. Implementations must be pure:
/// the same input gives the same labels on every call and every thread.
pub trait Evaluator: Send + Sync {
    fn id(&self) -> &str;

    /// Reject spaces the evaluator was not built for.
    fn check_space(&self, _space: &DesignSpace) -> Result<(), AnnotateError> {
        Ok(())
    }

    fn evaluate(&self, x: &[f64]) -> Labels;
}

pub fn evaluator_ids() -> Vec<&'static str> {
    vec![COMPRESSOR_EVALUATOR_ID]
}

/// Build a registered evaluator for `space`.
pub fn evaluator_by_id(id: &str, space: &DesignSpace) -> Result<Box<dyn Evaluator>, AnnotateError> {
    match id {
        COMPRESSOR_EVALUATOR_ID => Ok(Box::new(CompressorEvaluator::for_space(space)?)),
        other => Err(AnnotateError::UnknownEvaluator(other.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct AnnotationSummary {
    pub rows: usize,
    pub working: usize,
    pub errors: BTreeMap<ErrorCode, usize>,
    /// Rows on which the evaluator panicked (recorded as `numerical`).
    pub panics: usize,
}

impl AnnotationSummary {
    fn tally(labels: &[Labels], panics: usize) -> Self {
        let mut summary = AnnotationSummary {
            rows: labels.len(),
            panics,
            ..Default::default()
        };
        for l in labels {
            if l.working {
                summary.working += 1;
            }
            if let Some(code) = l.error {
                *summary.errors.entry(code).or_default() += 1;
            }
        }
        summary
    }

    pub fn working_fraction(&self) -> f64 {
        if self.rows == 0 {
            0.0
        } else {
            self.working as f64 / self.rows as f64
        }
    }
}

const PROGRESS_CHUNK: usize = 1024;

/// Label every row with `workers` threads. The output does not depend on
/// the worker count; a panic inside the evaluator only affects its own row.
pub fn batch_annotate(
    dataset: Dataset,
    evaluator: &dyn Evaluator,
    workers: usize,
) -> Result<(Dataset, AnnotationSummary), AnnotateError> {
    batch_annotate_with_progress(dataset, evaluator, workers, &|_, _| {})
}

/// As [`batch_annotate`], calling `progress(done, total)` as chunks finish.
pub fn batch_annotate_with_progress(
    mut dataset: Dataset,
    evaluator: &dyn Evaluator,
    workers: usize,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<(Dataset, AnnotationSummary), AnnotateError> {
    if workers == 0 {
        return Err(AnnotateError::InvalidWorkers);
    }
    evaluator.check_space(&dataset.space)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| AnnotateError::format("thread pool", e.to_string()))?;
    let total = dataset.rows.len();
    let done = AtomicUsize::new(0);
    let panics = AtomicUsize::new(0);
    let labels: Vec<Labels> = pool.install(|| {
        dataset
            .rows
            .par_chunks(PROGRESS_CHUNK)
            .flat_map_iter(|chunk| {
                let out: Vec<Labels> = chunk
                    .iter()
                    .map(|row| {
                        catch_unwind(AssertUnwindSafe(|| evaluator.evaluate(row))).unwrap_or_else(
                            |_| {
                                panics.fetch_add(1, Ordering::Relaxed);
                                Labels::failed(ErrorCode::Numerical)
                            },
                        )
                    })
                    .collect();
                let finished = done.fetch_add(chunk.len(), Ordering::Relaxed) + chunk.len();
                progress(finished, total);
                out
            })
            .collect()
    });
    let summary = AnnotationSummary::tally(&labels, panics.into_inner());
    dataset.labels = Some(labels);
    dataset.provenance.evaluator = Some(evaluator.id().to_string());
    Ok((dataset, summary))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct AnomalyReport {
    /// Working rows with `eta_tt` outside `(0, 1]`.
    pub eta_out_of_range: usize,
    pub pr_below_one: usize,
    pub non_finite: usize,
    /// Non-working rows whose values are not the sentinel pair, or working
    /// rows carrying an error code or `pr_tt = 1`.
    pub sentinel_mismatch: usize,
    pub flagged_rows: Vec<usize>,
}

impl AnomalyReport {
    pub fn is_clean(&self) -> bool {
        self.flagged_rows.is_empty()
    }
}

/// Enforce the label rules. Flagged rows become non-working with
/// `error = numerical` and sentinel values; a row is counted once per
/// class it violates.
pub fn postprocess_labels(mut dataset: Dataset) -> Result<(Dataset, AnomalyReport), AnnotateError> {
    let labels = dataset
        .labels
        .as_mut()
        .ok_or(AnnotateError::MissingLabels)?;
    let mut report = AnomalyReport::default();
    for (i, l) in labels.iter_mut().enumerate() {
        let non_finite = !l.eta_tt.is_finite() || !l.pr_tt.is_finite();
        let eta_bad =
            !non_finite && (l.eta_tt < 0.0 || l.eta_tt > 1.0 || (l.working && l.eta_tt == 0.0));
        let pr_bad = !non_finite && l.pr_tt < 1.0;
        let sentinel_bad = !non_finite
            && !eta_bad
            && !pr_bad
            && if l.working {
                l.error.is_some() || l.pr_tt == 1.0
            } else {
                l.eta_tt != 0.0 || l.pr_tt != 1.0
            };
        report.non_finite += non_finite as usize;
        report.eta_out_of_range += eta_bad as usize;
        report.pr_below_one += pr_bad as usize;
        report.sentinel_mismatch += sentinel_bad as usize;
        if non_finite || eta_bad || pr_bad || sentinel_bad {
            *l = Labels::failed(ErrorCode::Numerical);
            report.flagged_rows.push(i);
        }
    }
    Ok((dataset, report))
}
