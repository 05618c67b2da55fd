//! Rank-one convexity numerics for 2×2 matrices.
//!
//! Matrices are flattened row-major as `[F11, F12, F21, F22]`.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagonal;
pub mod envelope;
pub mod integrands;
pub mod jensen;
pub mod separation;

use thiserror::Error;
use ymlab_core::compactification::CompactificationError;
use ymlab_core::transform::TransformError;

/// Row-major 2×2 matrix.
pub type Mat2 = [f64; 4];

#[derive(Debug, Error)]
pub enum ConvexityError {
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Compactification(#[from] CompactificationError),
    #[error("invalid index set: {0}")]
    IndexSet(String),
    #[error("exponent {0} exceeds the 3^j overflow guard (j <= 32)")]
    ExponentOverflow(u32),
    #[error("horizon N_max = {0} too small to interleave the family; increase N_max")]
    HorizonTooSmall(u32),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("integrand must have linear growth (p = 1), got p = {0}")]
    NeedsLinearGrowth(f64),
    #[error("matrix has {0} entries, expected 4")]
    NotMatrix(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ConvexityError>;
