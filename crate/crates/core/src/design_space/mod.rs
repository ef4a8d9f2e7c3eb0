//! Parametric design spaces with independent and dependent bounds.
//!
//! A [`DesignSpace`] is an ordered list of [`FeatureSpec`]s. Bounds of a
//! feature may reference any feature declared before it, so every operation
//! walks the features in order and resolves bounds from the values already
//! seen. Integer and categorical values are stored in the same `f64` slots as
//! continuous ones (whole numbers and category indices respectively).

mod expr;
mod parse;

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use expr::{BoundExpr, Comparison, LinearExpr};
pub use parse::parse_space;

const COMPRESSOR_DOCUMENT: &str = include_str!("../../assets/compressor.space");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: bound of `{feature}` references `{reference}`, which is not declared before it")]
    ForwardReference {
        line: usize,
        feature: String,
        reference: String,
    },
    #[error("line {line}: unknown distribution `{name}`")]
    UnknownDistribution { line: usize, name: String },
    #[error("line {line}: feature `{feature}` is unbounded; only bounded spaces are supported")]
    Unbounded { line: usize, feature: String },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("feature `{feature}` resolved to inconsistent bounds [{lower}, {upper}]")]
    DegenerateBounds {
        feature: String,
        lower: f64,
        upper: f64,
    },
    #[error("bounds of `{feature}` need values that are not available yet")]
    MissingDependency { feature: String },
    #[error("expected {expected} values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Integer,
    Categorical,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Continuous => "continuous",
            FeatureKind::Integer => "integer",
            FeatureKind::Categorical => "categorical",
        }
    }
}

/// Per-feature sampling distribution on the resolved interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Uniform,
    /// Density proportional to `t^(alpha - 1)` on the unit interval, mapped
    /// affinely onto the resolved bounds (skews towards the upper bound for
    /// `alpha > 1`).
    Power {
        alpha: f64,
    },
    Fixed(f64),
}

impl Distribution {
    /// Inverse CDF on the unit interval.
    pub fn quantile(self, u: f64) -> f64 {
        match self {
            Distribution::Uniform => u,
            Distribution::Power { alpha } => u.powf(1.0 / alpha),
            Distribution::Fixed(_) => 0.0,
        }
    }

    fn render(self) -> String {
        match self {
            Distribution::Uniform => "uniform".into(),
            Distribution::Power { alpha } => format!("power({alpha})"),
            Distribution::Fixed(value) => format!("fixed({value})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: BoundExpr,
    pub upper: BoundExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// `None` for categorical features.
    pub bounds: Option<Bounds>,
    pub unit: String,
    pub distribution: Distribution,
    pub categories: Vec<String>,
}

impl FeatureSpec {
    pub fn is_fixed(&self) -> bool {
        matches!(self.distribution, Distribution::Fixed(_))
    }

    pub fn is_dependent(&self) -> bool {
        self.bounds
            .as_ref()
            .is_some_and(|b| b.lower.as_constant().is_none() || b.upper.as_constant().is_none())
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == name)
    }
}

/// A design: one value per feature, in space order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DesignVector(pub Vec<f64>);

impl Deref for DesignVector {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for DesignVector {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

impl From<Vec<f64>> for DesignVector {
    fn from(values: Vec<f64>) -> Self {
        DesignVector(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    OutOfBounds,
    NotIntegral,
    UnknownCategory,
    NotFinite,
    /// Bounds could not be resolved from the other values.
    Unresolvable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub feature: String,
    pub lower: f64,
    pub upper: f64,
    pub value: f64,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpace {
    pub name: String,
    pub version: u32,
    pub features: Vec<FeatureSpec>,
}

/// Relative slack when comparing a value against resolved bounds; values
/// written to and read back from CSV must not drift out of their own bounds.
const BOUND_SLACK: f64 = 1e-12;

impl DesignSpace {
    /// The bundled centrifugal-compressor space (23 features).
    pub fn compressor() -> Self {
        parse_space(COMPRESSOR_DOCUMENT).expect("bundled compressor space is well-formed")
    }

    pub fn compressor_document() -> &'static str {
        COMPRESSOR_DOCUMENT
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn feature(&self, name: &str) -> Result<&FeatureSpec, SpaceError> {
        self.features
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| SpaceError::UnknownFeature(name.to_string()))
    }

    /// Numeric bounds of feature `index` given values for (at least) every
    /// feature it references. Categorical features resolve to
    /// `(0, n_categories - 1)`.
    pub fn resolve_bounds(&self, partial: &[f64], index: usize) -> Result<(f64, f64), SpaceError> {
        let feature = &self.features[index];
        let Some(bounds) = &feature.bounds else {
            return Ok((0.0, feature.categories.len().saturating_sub(1) as f64));
        };
        let missing = || SpaceError::MissingDependency {
            feature: feature.name.clone(),
        };
        let lower = bounds.lower.eval(partial).ok_or_else(missing)?;
        let upper = bounds.upper.eval(partial).ok_or_else(missing)?;
        if !(lower <= upper) {
            return Err(SpaceError::DegenerateBounds {
                feature: feature.name.clone(),
                lower,
                upper,
            });
        }
        Ok((lower, upper))
    }

    /// Integer range admitted by feature `index`, as inclusive whole numbers.
    fn integer_range(&self, partial: &[f64], index: usize) -> Result<(f64, f64), SpaceError> {
        let (lower, upper) = self.resolve_bounds(partial, index)?;
        let (lo, hi) = (snap_ceil(lower), snap_floor(upper));
        if lo > hi {
            return Err(SpaceError::DegenerateBounds {
                feature: self.features[index].name.clone(),
                lower,
                upper,
            });
        }
        Ok((lo, hi))
    }

    pub fn validate_vector(&self, x: &[f64]) -> Result<ValidationReport, SpaceError> {
        self.check_len(x)?;
        let mut violations = Vec::new();
        for (index, feature) in self.features.iter().enumerate() {
            let value = x[index];
            let mut report = |lower: f64, upper: f64, kind: ViolationKind| {
                violations.push(Violation {
                    feature: feature.name.clone(),
                    lower,
                    upper,
                    value,
                    kind,
                })
            };
            if !value.is_finite() {
                report(f64::NAN, f64::NAN, ViolationKind::NotFinite);
                continue;
            }
            let (lower, upper) = match self.resolve_bounds(x, index) {
                Ok(bounds) => bounds,
                Err(SpaceError::DegenerateBounds { lower, upper, .. }) => {
                    report(lower, upper, ViolationKind::Unresolvable);
                    continue;
                }
                Err(_) => {
                    report(f64::NAN, f64::NAN, ViolationKind::Unresolvable);
                    continue;
                }
            };
            match feature.kind {
                FeatureKind::Categorical => {
                    if value.fract() != 0.0 || value < 0.0 || value > upper {
                        report(lower, upper, ViolationKind::UnknownCategory);
                    }
                }
                FeatureKind::Integer | FeatureKind::Continuous => {
                    let slack = BOUND_SLACK * lower.abs().max(upper.abs()).max(1.0);
                    if value < lower - slack || value > upper + slack {
                        report(lower, upper, ViolationKind::OutOfBounds);
                    } else if feature.kind == FeatureKind::Integer && value.fract() != 0.0 {
                        report(lower, upper, ViolationKind::NotIntegral);
                    }
                }
            }
        }
        Ok(ValidationReport {
            valid: violations.is_empty(),
            violations,
        })
    }

    /// Affine map of every coordinate onto `[0, 1]` by its resolved bounds.
    /// Degenerate intervals (including fixed features) map to 0.5.
    pub fn normalize(&self, x: &[f64]) -> Result<Vec<f64>, SpaceError> {
        self.check_len(x)?;
        let mut out = Vec::with_capacity(x.len());
        for index in 0..self.dim() {
            let (lower, upper) = self.resolve_bounds(x, index)?;
            let width = upper - lower;
            out.push(if width > 0.0 {
                (x[index] - lower) / width
            } else {
                0.5
            });
        }
        Ok(out)
    }

    /// Inverse of [`normalize`](Self::normalize). Integer and categorical
    /// coordinates are rounded to the nearest admissible value; degenerate
    /// intervals return their lower bound.
    pub fn denormalize(&self, unit: &[f64]) -> Result<DesignVector, SpaceError> {
        self.check_len(unit)?;
        let mut out: Vec<f64> = Vec::with_capacity(unit.len());
        for (index, feature) in self.features.iter().enumerate() {
            let value = match feature.kind {
                FeatureKind::Continuous => {
                    let (lower, upper) = self.resolve_bounds(&out, index)?;
                    if upper > lower {
                        (lower + unit[index] * (upper - lower)).clamp(lower, upper)
                    } else {
                        lower
                    }
                }
                FeatureKind::Integer => {
                    let (lower, upper) = self.resolve_bounds(&out, index)?;
                    let (lo, hi) = self.integer_range(&out, index)?;
                    let raw = if upper > lower {
                        lower + unit[index] * (upper - lower)
                    } else {
                        lower
                    };
                    raw.round().clamp(lo, hi)
                }
                FeatureKind::Categorical => {
                    let last = feature.categories.len().saturating_sub(1) as f64;
                    (unit[index] * last).round().clamp(0.0, last)
                }
            };
            out.push(value);
        }
        Ok(DesignVector(out))
    }

    /// Map a point of the unit hypercube to a design, applying each feature's
    /// distribution. Used by every sampler: a uniform draw on `[0, 1)^d`
    /// yields a draw from the space's sampling distribution, and stratified
    /// unit points stay stratified in each coordinate's pre-image.
    ///
    /// Integer features take `lo + floor(u * count)` so equal-width unit bins
    /// map to equally likely integers.
    pub fn from_unit(&self, unit: &[f64]) -> Result<DesignVector, SpaceError> {
        self.check_len(unit)?;
        let mut out: Vec<f64> = Vec::with_capacity(unit.len());
        for (index, feature) in self.features.iter().enumerate() {
            let u = unit[index].clamp(0.0, 1.0);
            let value = match (feature.kind, feature.distribution) {
                (_, Distribution::Fixed(value)) => value,
                (FeatureKind::Continuous, dist) => {
                    let (lower, upper) = self.resolve_bounds(&out, index)?;
                    (lower + dist.quantile(u) * (upper - lower)).clamp(lower, upper)
                }
                (FeatureKind::Integer, dist) => {
                    let (lo, hi) = self.integer_range(&out, index)?;
                    let count = hi - lo + 1.0;
                    (lo + (dist.quantile(u) * count).floor()).min(hi)
                }
                (FeatureKind::Categorical, _) => {
                    let count = feature.categories.len() as f64;
                    (u * count).floor().min(count - 1.0)
                }
            };
            out.push(value);
        }
        Ok(DesignVector(out))
    }

    /// Copy of the space with one feature's bounds replaced by constants.
    /// The new interval must lie inside the feature's independent bounds.
    pub fn restrict(&self, name: &str, lower: f64, upper: f64) -> Result<Self, SpaceError> {
        let index = self
            .index_of(name)
            .ok_or_else(|| SpaceError::UnknownFeature(name.to_string()))?;
        let feature = &self.features[index];
        let invalid = |message: String| SpaceError::Invalid { line: 0, message };
        let Some(bounds) = &feature.bounds else {
            return Err(invalid(format!(
                "cannot restrict categorical feature `{name}`"
            )));
        };
        if feature.is_fixed() {
            return Err(invalid(format!("cannot restrict fixed feature `{name}`")));
        }
        if !(lower <= upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(SpaceError::DegenerateBounds {
                feature: name.to_string(),
                lower,
                upper,
            });
        }
        if let (Some(lo), Some(hi)) = (bounds.lower.as_constant(), bounds.upper.as_constant()) {
            if lower < lo || upper > hi {
                return Err(invalid(format!(
                    "restriction [{lower}, {upper}] of `{name}` leaves its bounds [{lo}, {hi}]"
                )));
            }
        }
        let mut space = self.clone();
        space.features[index].bounds = Some(Bounds {
            lower: BoundExpr::constant(lower),
            upper: BoundExpr::constant(upper),
        });
        Ok(space)
    }

    /// Render the space in the same plain-text format [`parse_space`] reads.
    pub fn to_document(&self) -> String {
        let names = self.names();
        let mut out = format!("space {}\nversion {}\n", self.name, self.version);
        out.push_str("# name | kind | lower | upper | unit | distribution | categories\n");
        for feature in &self.features {
            let (lower, upper) = match &feature.bounds {
                Some(b) => (b.lower.render(&names), b.upper.render(&names)),
                None => ("-".into(), "-".into()),
            };
            let unit = if feature.unit.is_empty() {
                "-"
            } else {
                &feature.unit
            };
            out.push_str(&format!(
                "{} | {} | {} | {} | {} | {} | {}\n",
                feature.name,
                feature.kind.as_str(),
                lower,
                upper,
                unit,
                feature.distribution.render(),
                feature.categories.join(", ")
            ));
        }
        out
    }

    fn check_len(&self, x: &[f64]) -> Result<(), SpaceError> {
        if x.len() != self.dim() {
            return Err(SpaceError::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }
}

// Bounds such as 0.015*r4 land a hair off whole numbers; snap before
// taking integer ranges.
fn snap_ceil(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v.ceil()
    }
}

fn snap_floor(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v.floor()
    }
}
