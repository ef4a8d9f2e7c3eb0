// `!(x > 0.0)` is used on purpose to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annotate;
pub mod design_space;
pub mod metrics;
pub mod sampling;
pub mod testsets;
pub mod validation;
