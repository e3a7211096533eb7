//! Tile scoring: color features, the logistic baseline scorer, per-slide
//! tile sampling, color jitter, and import/export of tile scores.

mod features;
mod jitter;
mod model;
mod sampling;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub use features::{extract_features, layout, FeatureVector, FEATURE_DIM, HIST_BINS};
pub use jitter::{apply_jitter, color_jitter, JitterFactors, JitterParams};
pub use model::{
    logistic_loss_and_gradient, model_id, score_tile, sigmoid, train_baseline_scorer, ModelCard,
    ModelMetadata, ScorerModel, TrainConfig, TrainOutcome, TrainingSlide,
};
pub use sampling::{sample_tiles_per_slide, SkippedSlide, TileDraw, TileGroup, TileSample};

use crate::csvio;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tiling::TileRef;

/// Melanoma probability of one tile under one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TileScore<T> {
    pub tile: TileRef,
    pub score: T,
    pub model_id: String,
}

pub const TILE_SCORE_HEADER: [&str; 7] = [
    "slide_id",
    "stain",
    "magnification",
    "grid_x",
    "grid_y",
    "score",
    "model_id",
];

/// Writes the tile-score CSV. Scores use the shortest round-tripping decimal.
pub fn write_tile_scores<T: Scalar, W: Write>(out: W, scores: &[TileScore<T>]) -> Result<()> {
    let mut w = csvio::writer(out);
    w.write_record(TILE_SCORE_HEADER)?;
    for s in scores {
        w.write_record([
            s.tile.slide_id.clone(),
            s.tile.stain.to_string(),
            s.tile.magnification.to_string(),
            s.tile.grid_x.to_string(),
            s.tile.grid_y.to_string(),
            s.score.to_string(),
            s.model_id.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<tile scores>", e))?;
    Ok(())
}

/// Reads externally computed tile scores. Rows are numbered from 1 after
/// the header; a score outside `[0, 1]` is rejected with its row number.
pub fn import_external_scores<T: Scalar, R: Read>(input: R, name: &str) -> Result<Vec<TileScore<T>>> {
    let mut reader = csvio::reader(input, name, &TILE_SCORE_HEADER)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csvio::record_error(name, row, e.to_string()))?;
        let field = |k: usize| csvio::field(&record, k, name, row);
        let score: T = csvio::parse(field(5)?, name, row)?;
        if !(score >= T::zero() && score <= T::one()) {
            return Err(csvio::record_error(
                name,
                row,
                format!("score {score} outside [0, 1]"),
            ));
        }
        let tile = TileRef::new(
            field(0)?,
            csvio::parse(field(1)?, name, row)?,
            csvio::parse(field(2)?, name, row)?,
            csvio::parse(field(3)?, name, row)?,
            csvio::parse(field(4)?, name, row)?,
        );
        out.push(TileScore {
            tile,
            score,
            model_id: field(6)?.to_string(),
        });
    }
    Ok(out)
}
