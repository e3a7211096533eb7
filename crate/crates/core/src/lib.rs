//! Multi-stain slide classification: tessellation, tile scoring, slide
//! aggregation, score fusion, bootstrap ROC evaluation and a synthetic
//! three-site cohort generator.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the bottom of this file fix it to [`Real`].

pub mod aggregate;
pub mod color;
pub(crate) mod csvio;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod labels;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod scoring;
pub mod stats;
pub mod synth;
pub mod tiling;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default scalar type.
pub type Real = f64;

pub type SlidePrediction = aggregate::SlidePrediction<Real>;
pub type TileScore = scoring::TileScore<Real>;
pub type ScorerModel = scoring::ScorerModel<Real>;
pub type FusionConfig = fusion::FusionConfig<Real>;
pub type FusedPrediction = fusion::FusedPrediction<Real>;
pub type CohortPredictions = evaluation::CohortPredictions<Real>;
pub type RocResult = evaluation::RocResult<Real>;
