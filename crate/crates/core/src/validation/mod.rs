//! Dataset characterization (statistics, correlation, PCA, clustering,
//! diversity and realism) and downstream verification with a k-NN
//! baseline classifier.

mod correlation;
mod kmeans;
mod knn;
mod pca;
mod report;
mod scoring;
mod stats;

use thiserror::Error;

use crate::metrics::MetricError;

pub use correlation::{correlation, fractional_ranks, CorrelationKind};
pub use kmeans::{kmeans, KMeansResult, DEFAULT_MAX_ITER};
pub use knn::{knn_fit, knn_predict, Classifier, KnnModel, DEFAULT_NEIGHBORS};
pub use pca::{pca_2d, pca_fit, PcaModel};
pub use report::{
    curve_csv, evaluate_dataset, importance_csv, ClassBalance, DiversityBlock, EvalReport,
    NamedMatrix, PcaSummary, RealismBlock, ReportOptions, TestScore, WorkingShare,
};
pub use scoring::{
    anova_f, f1_score, learning_curve, mixture_scores, permutation_importance, Confusion,
    CurvePoint, FeatureImportance, LabeledSet,
};
pub use stats::{
    describe_column, descriptive_stats, histogram, quantile_sorted, ColumnStats, Histogram,
    DEFAULT_HISTOGRAM_BINS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("no rows to work with")]
    Empty,
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("length mismatch ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("cannot form {k} clusters from {n} rows")]
    InvalidClusterCount { k: usize, n: usize },
    #[error("cannot keep {k} components (at most {max})")]
    InvalidComponents { k: usize, max: usize },
    #[error("neighbor count must be positive")]
    InvalidNeighbors,
    #[error("sample size {size} is not available from a pool of {pool}")]
    SizeExceedsPool { size: usize, pool: usize },
    #[error("no test sets to score against")]
    NoTestSets,
    #[error("dataset has no labels")]
    MissingLabels,
    #[error(transparent)]
    Metric(#[from] MetricError),
}
