//! Distance and similarity primitives, plus set-level diversity and realism
//! measures.
//!
//! Nothing here rescales its inputs: callers pass normalized design vectors
//! (see [`DesignSpace::normalize`](crate::design_space::DesignSpace::normalize))
//! or standardized label columns so that no single feature dominates.

mod distance;
mod geometry;
mod histogram;
mod neighbors;
mod sets;

use thiserror::Error;

pub use distance::{
    cosine_similarity, distance, dpp_log_det, rbf_similarity, DistanceKind, SimilarityKernel,
    SimilarityMatrix,
};
pub use geometry::{convex_hull, hull_and_box, minimal_enclosing_circle, HullSummary};
pub use histogram::{kl_divergence_hist, shannon_entropy, Binning, KL_SMOOTHING};
pub use neighbors::{nearest_neighbor_distances, nn_distance_stats, NnStats};
pub use sets::{set_distance, SetDistanceKind};

pub(crate) use distance::squared_euclidean;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("point set is empty")]
    EmptySet,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("index {index} out of range for a {size}x{size} kernel")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("histograms support 1 or 2 dimensions, got {0}")]
    UnsupportedDimension(usize),
    #[error("invalid binning: {0}")]
    InvalidBinning(String),
}
