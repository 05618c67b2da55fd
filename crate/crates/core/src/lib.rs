//! Discrete generalised Young measures on separable compactifications.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compactification;
pub mod measure;
pub mod transform;
pub mod transport;
pub mod vecops;
pub mod young;
