//! Samplers over a [`DesignSpace`]: random, space-filling, augmentation and
//! subset selection from a candidate pool.
//!
//! Every generator works on the unit hypercube and maps points through
//! [`DesignSpace::from_unit`] (or [`DesignSpace::denormalize`] for
//! augmentation), so dependent bounds are resolved row by row in feature
//! order and every emitted row is valid for the space.

mod augment;
mod cluster;
mod dpp;
mod lhs;
mod sobol;
mod sobol_table;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design_space::{DesignSpace, DesignVector, SpaceError};
use crate::metrics::MetricError;

pub use augment::{augment, DEFAULT_SIGMA_FRAC};
pub use cluster::cluster_select;
pub use dpp::{
    dpp_greedy_select, greedy_map, standardize_columns, DppSelection, KernelBlend, PsdReport,
    JITTER, PSD_TOLERANCE,
};
pub use lhs::sample_lhs;
pub use sobol::{sample_sobol, SobolSequence, MAX_DIMENSION, MAX_LOG2_POINTS};

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("requested an empty sample")]
    Empty,
    #[error("2^{m} points exceeds the limit of 2^{max}")]
    TooManyPoints { m: u32, max: u32 },
    #[error("space has {dim} features; the Sobol generator supports at most {max}")]
    TooManyDimensions { dim: usize, max: usize },
    #[error("augmentation needs at least one parent")]
    NoParents,
    #[error("noise scale must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("cannot select {k} of {n} candidates")]
    SubsetTooLarge { k: usize, n: usize },
    #[error("{clusters} clusters requested for k = {k} picks from {n} candidates")]
    InvalidClusters { clusters: usize, k: usize, n: usize },
    #[error("blend weight must lie in [0, 1], got {0}")]
    InvalidWeight(f64),
    #[error("performance kernel needs labels for all {expected} candidates, got {actual}")]
    MissingLabels { expected: usize, actual: usize },
    #[error("kernel is not positive semidefinite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// How a batch of rows was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Uniform,
    Sobol,
    Lhs,
    Augment,
    Dpp,
    Cluster,
    /// Operating-condition sweep around a fixed design.
    Grid,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Uniform => "uniform",
            Method::Sobol => "sobol",
            Method::Lhs => "lhs",
            Method::Augment => "augment",
            Method::Dpp => "dpp",
            Method::Cluster => "cluster",
            Method::Grid => "grid",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "uniform" => Method::Uniform,
            "sobol" => Method::Sobol,
            "lhs" => Method::Lhs,
            "augment" => Method::Augment,
            "dpp" => Method::Dpp,
            "cluster" => Method::Cluster,
            "grid" => Method::Grid,
            other => return Err(format!("unknown sampling method `{other}`")),
        })
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub space: DesignSpace,
    pub rows: Vec<DesignVector>,
    pub seed: u64,
    pub method: Method,
    /// Index into the parent list for each row (augmentation only).
    pub parents: Option<Vec<usize>>,
    /// Number of coordinates clipped back into bounds.
    pub clip_events: usize,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn normalized(&self) -> Result<Vec<Vec<f64>>, SpaceError> {
        normalize_rows(&self.space, &self.rows)
    }
}

pub(crate) fn normalize_rows(
    space: &DesignSpace,
    rows: &[DesignVector],
) -> Result<Vec<Vec<f64>>, SpaceError> {
    rows.par_iter().map(|r| space.normalize(r)).collect()
}

/// Map unit points through the space in parallel, preserving order.
fn map_unit_points(
    space: &DesignSpace,
    points: Vec<Vec<f64>>,
) -> Result<Vec<DesignVector>, SpaceError> {
    points
        .into_par_iter()
        .map(|u| space.from_unit(&u))
        .collect()
}

fn batch(space: &DesignSpace, rows: Vec<DesignVector>, seed: u64, method: Method) -> SampleBatch {
    SampleBatch {
        space: space.clone(),
        rows,
        seed,
        method,
        parents: None,
        clip_events: 0,
    }
}

/// Independent draws from each feature's distribution.
pub fn sample_uniform(
    space: &DesignSpace,
    n: usize,
    seed: u64,
) -> Result<SampleBatch, SamplingError> {
    if n == 0 {
        return Err(SamplingError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = space.dim();
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect();
    Ok(batch(
        space,
        map_unit_points(space, points)?,
        seed,
        Method::Uniform,
    ))
}
