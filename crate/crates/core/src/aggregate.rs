//! Slide-level aggregation: mean of tile scores plus a percentile bootstrap
//! over tiles.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::csvio;
use crate::error::{Error, Result};
use crate::labels::BinaryLabel;
use crate::scalar::Scalar;
use crate::stats::{self, BootstrapConfig, Interval};
use crate::tiling::Stain;

/// Stain(s) a prediction is based on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "HE")]
    HE,
    #[serde(rename = "MelanA")]
    MelanA,
    #[serde(rename = "HE+MelanA")]
    Combined,
}

impl From<Stain> for Modality {
    fn from(s: Stain) -> Self {
        match s {
            Stain::HE => Modality::HE,
            Stain::MelanA => Modality::MelanA,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::HE => "HE",
            Modality::MelanA => "MelanA",
            Modality::Combined => "HE+MelanA",
        })
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "HE+MelanA" => Ok(Modality::Combined),
            other => other.parse::<Stain>().map(Modality::from),
        }
    }
}

/// One model's score for one slide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SlidePrediction<T> {
    pub slide_id: String,
    pub stain: Modality,
    pub model_id: String,
    pub score: T,
    pub n_tiles: usize,
    pub ci: Option<Interval<T>>,
    pub label: Option<BinaryLabel>,
}

fn value_range<T: Scalar>(xs: &[T]) -> (T, T) {
    xs.iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &s| (lo.min(s), hi.max(s)))
}

/// Mean of a slide's tile scores.
pub fn aggregate_slide<T: Scalar>(
    slide_id: &str,
    stain: Modality,
    model_id: &str,
    tile_scores: &[T],
) -> Result<SlidePrediction<T>> {
    let score = stats::mean(tile_scores).ok_or_else(|| Error::EmptySlide {
        slide_id: slide_id.to_string(),
    })?;
    // rounding can push the mean a hair outside the data range
    let (lo, hi) = value_range(tile_scores);
    Ok(SlidePrediction {
        slide_id: slide_id.to_string(),
        stain,
        model_id: model_id.to_string(),
        score: score.max(lo).min(hi),
        n_tiles: tile_scores.len(),
        ci: None,
        label: None,
    })
}

/// Percentile bootstrap CI of the slide score: each replicate resamples the
/// tiles with replacement and takes their mean.
pub fn slide_score_ci<T: Scalar>(tile_scores: &[T], config: &BootstrapConfig) -> Result<Interval<T>> {
    config.validate()?;
    if tile_scores.is_empty() {
        return Err(Error::EmptySlide {
            slide_id: String::new(),
        });
    }
    let n = tile_scores.len();
    let inv_n = T::one() / T::from_usize_exact(n);
    let (lo, hi) = value_range(tile_scores);
    let mut means = stats::replicate(config, |rng| {
        let mut sum = T::zero();
        for _ in 0..n {
            sum += tile_scores[rng.random_range(0..n)];
        }
        (sum * inv_n).max(lo).min(hi)
    });
    Ok(stats::percentile_interval(&mut means, config.alpha))
}

/// `aggregate_slide` followed by `slide_score_ci`.
pub fn aggregate_with_ci<T: Scalar>(
    slide_id: &str,
    stain: Modality,
    model_id: &str,
    tile_scores: &[T],
    config: &BootstrapConfig,
) -> Result<SlidePrediction<T>> {
    let mut pred = aggregate_slide(slide_id, stain, model_id, tile_scores)?;
    pred.ci = Some(slide_score_ci(tile_scores, config)?);
    Ok(pred)
}

pub const SLIDE_PREDICTION_HEADER: [&str; 8] = [
    "slide_id", "stain", "model_id", "score", "n_tiles", "ci_low", "ci_high", "label",
];

pub fn write_slide_predictions<T: Scalar, W: Write>(out: W, preds: &[SlidePrediction<T>]) -> Result<()> {
    let mut w = csvio::writer(out);
    w.write_record(SLIDE_PREDICTION_HEADER)?;
    for p in preds {
        let (lo, hi) = p
            .ci
            .map(|ci| (ci.low.to_string(), ci.high.to_string()))
            .unwrap_or_default();
        w.write_record([
            p.slide_id.clone(),
            p.stain.to_string(),
            p.model_id.clone(),
            p.score.to_string(),
            p.n_tiles.to_string(),
            lo,
            hi,
            p.label.map(|l| l.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<slide predictions>", e))?;
    Ok(())
}

pub fn read_slide_predictions<T: Scalar, R: Read>(input: R, name: &str) -> Result<Vec<SlidePrediction<T>>> {
    let mut reader = csvio::reader(input, name, &SLIDE_PREDICTION_HEADER)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let field = |k: usize| csvio::field(&record, k, name, row);
        let score: T = csvio::parse(field(3)?, name, row)?;
        if !(score >= T::zero() && score <= T::one()) {
            return Err(csvio::record_error(name, row, format!("score {score} outside [0, 1]")));
        }
        let low: Option<T> = csvio::parse_opt(field(5)?, name, row)?;
        let high: Option<T> = csvio::parse_opt(field(6)?, name, row)?;
        let ci = match (low, high) {
            (Some(low), Some(high)) if low <= high => Some(Interval { low, high }),
            (None, None) => None,
            _ => return Err(csvio::record_error(name, row, "incomplete or inverted CI")),
        };
        out.push(SlidePrediction {
            slide_id: field(0)?.to_string(),
            stain: csvio::parse(field(1)?, name, row)?,
            model_id: field(2)?.to_string(),
            score,
            n_tiles: csvio::parse(field(4)?, name, row)?,
            ci,
            label: csvio::parse_opt(field(7)?, name, row)?,
        });
    }
    Ok(out)
}
