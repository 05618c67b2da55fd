//! Scenario gallery and command-line harness on top of `ymlab-core` and
//! `ymlab-convexity`.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characterisation;
pub mod cli;
pub mod config;
pub mod gallery;
pub mod inhomogenize;
pub mod quadrature;
pub mod report;
pub mod strict;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Young(#[from] ymlab_core::young::YoungError),
    #[error(transparent)]
    Measure(#[from] ymlab_core::measure::MeasureError),
    #[error(transparent)]
    Transform(#[from] ymlab_core::transform::TransformError),
    #[error(transparent)]
    Compactification(#[from] ymlab_core::compactification::CompactificationError),
    #[error(transparent)]
    Transport(#[from] ymlab_core::transport::TransportError),
    #[error(transparent)]
    Convexity(#[from] ymlab_convexity::ConvexityError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("singular support at distance {delta} from the boundary needs 2^(1-a) < {delta} (a = {a}); increase a")]
    IncreaseA { a: u32, delta: f64 },
    #[error("hypothesis λ(∂Ω)=0 violated: boundary mass {0}")]
    BoundaryMass(f64),
    #[error("integrand '{0}' is not positively 1-homogeneous")]
    NotHomogeneous(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, ScenarioError>;
