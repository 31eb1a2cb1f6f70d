//! Optimal transport between empirical structural measures.
//!
//! The estimation path is: pooled z-scoring of both samples, Euclidean cost
//! matrix rescaled by its maximum, then log-domain Sinkhorn with uniform
//! marginals. [`exact_w1`] solves the unregularized problem exactly for
//! small instances and serves as the reference for the entropic estimate.

mod exact;
mod measure;
mod pipeline;
mod sinkhorn;

use thiserror::Error;

pub use exact::{exact_plan, exact_w1, EXACT_SIZE_CAP};
pub use measure::{standardize, CostMatrix, EmpiricalMeasure, StandardizationStats, NORMALIZATION_EPS, WEIGHT_SUM_TOL};
pub use pipeline::{pipeline_w1, w1_between_features, Method, PlanFile, W1Config, W1Report};
pub use sinkhorn::{sinkhorn_plan, sinkhorn_w1, Domain, SinkhornOptions, TransportPlan};

use crate::projection::ProjectionError;
use crate::trajectory::corpus::CorpusError;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("a measure needs at least one point")]
    EmptyMeasure,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid weights: {0}")]
    Weights(String),
    #[error("regularization must be positive and finite, got {0}")]
    Lambda(f64),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("instance of size {size} exceeds the exact-solver cap of {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error("sampling: {0}")]
    Sampling(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
}
