use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::jitter::JitterParams;
use super::sampling::{sample_tiles_per_slide, TileGroup};
use crate::error::{Error, Result};
use crate::rng::{child_seed, stream_rng, substream};
use crate::scalar::Scalar;
use crate::tiling::{Magnification, Stain};

/// Training provenance stored with a model. The architecture and pooling
/// fields document the model this scorer stands in for; they are not used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub stain: Stain,
    pub magnification: Magnification,
    pub training_seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub sampling_number: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<JitterParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub architecture: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pooling: Option<String>,
}

/// Linear tile scorer: `sigmoid(w . x + b)` on raw features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ScorerModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub metadata: ModelMetadata,
}

/// Identifier of the scorer for a stain and magnification, e.g. `MelanA@20x`.
pub fn model_id(stain: Stain, magnification: Magnification) -> String {
    format!("{stain}@{magnification}")
}

impl<T: Scalar> ScorerModel<T> {
    pub fn model_id(&self) -> String {
        model_id(self.metadata.stain, self.metadata.magnification)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !w.is_finite()) || !self.bias.is_finite() {
            return Err(Error::InvalidInput(format!(
                "model {} has non-finite weights",
                self.model_id()
            )));
        }
        if self.metadata.sampling_number == 0 {
            return Err(Error::InvalidInput("sampling_number must be >= 1".into()));
        }
        Ok(())
    }

    pub fn logit(&self, features: &FeatureVector<T>) -> Result<T> {
        if features.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                found: features.len(),
            });
        }
        Ok(dot(&self.weights, &features.values) + self.bias)
    }

    pub fn score(&self, features: &FeatureVector<T>) -> Result<T> {
        self.logit(features).map(sigmoid)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ScorerModel<T> = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Melanoma probability of one tile.
pub fn score_tile<T: Scalar>(model: &ScorerModel<T>, features: &FeatureVector<T>) -> Result<T> {
    model.score(features)
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Logistic function, evaluated without overflow for large `|z|`.
#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^z)`, stable for both signs.
#[inline]
fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

/// Mean binary cross-entropy of `sigmoid(w . x + b)` against labels in
/// `{0, 1}` and its gradient with respect to `(w, b)`.
pub fn logistic_loss_and_gradient<T: Scalar>(
    weights: &[T],
    bias: T,
    batch: &[(&[T], T)],
) -> (T, Vec<T>, T) {
    let mut grad_w = vec![T::zero(); weights.len()];
    let mut grad_b = T::zero();
    let mut loss = T::zero();
    if batch.is_empty() {
        return (loss, grad_w, grad_b);
    }
    for &(x, y) in batch {
        let z = dot(weights, x) + bias;
        loss += softplus(z) - y * z;
        let residual = sigmoid(z) - y;
        for (g, &xi) in grad_w.iter_mut().zip(x) {
            *g += residual * xi;
        }
        grad_b += residual;
    }
    let n = T::from_usize_exact(batch.len());
    grad_w.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad_w, grad_b / n)
}

/// Tiles of one training slide, all carrying the slide label.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSlide<T> {
    pub slide_id: String,
    pub melanoma: bool,
    pub tiles: Vec<FeatureVector<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Tiles drawn per slide in every epoch (the "sampling number").
    pub quota: usize,
    /// Mini-batch size; `None` uses the whole epoch sample as one batch.
    pub batch_size: Option<usize>,
    pub seed: u64,
}

/// What the trained model stands for; copied into its metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelCard {
    pub jitter: Option<JitterParams>,
    pub architecture: Option<String>,
    pub pooling: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<T> {
    pub model: ScorerModel<T>,
    /// Mean loss on each epoch's sample after that epoch's updates.
    pub epoch_losses: Vec<T>,
    pub skipped_slides: Vec<String>,
}

/// Trains the logistic tile scorer with mini-batch gradient descent.
///
/// Every epoch redraws `quota` tiles per slide, shuffles them and walks the
/// batches. Features are standardized internally; the returned weights are
/// folded back so the model scores raw feature vectors. Weights start at 0.
pub fn train_baseline_scorer<T: Scalar>(
    slides: &[TrainingSlide<T>],
    config: &TrainConfig,
    stain: Stain,
    magnification: Magnification,
    card: &ModelCard,
) -> Result<TrainOutcome<T>> {
    if !(config.learning_rate.is_finite() && config.learning_rate >= 0.0) {
        return Err(Error::InvalidInput("learning_rate must be finite and >= 0".into()));
    }
    if config.batch_size == Some(0) {
        return Err(Error::InvalidInput("batch_size must be >= 1".into()));
    }
    let with_tiles = |label: bool| slides.iter().any(|s| s.melanoma == label && !s.tiles.is_empty());
    if !(with_tiles(true) && with_tiles(false)) {
        return Err(Error::DegenerateTrainingSet(
            "need at least one melanoma and one nevus slide with tiles".into(),
        ));
    }
    let dim = slides
        .iter()
        .flat_map(|s| s.tiles.first())
        .map(FeatureVector::len)
        .next()
        .unwrap_or(0);
    if let Some(bad) = slides.iter().flat_map(|s| &s.tiles).find(|f| f.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }

    let (center, scale) = standardization(slides, dim);
    let standardized: Vec<Vec<Vec<T>>> = slides
        .iter()
        .map(|s| {
            s.tiles
                .iter()
                .map(|f| {
                    f.values
                        .iter()
                        .zip(center.iter().zip(&scale))
                        .map(|(&x, (&c, &sd))| (x - c) / sd)
                        .collect()
                })
                .collect()
        })
        .collect();
    let groups: Vec<TileGroup<'_, Vec<T>>> = slides
        .iter()
        .zip(&standardized)
        .map(|(s, tiles)| TileGroup {
            slide_id: &s.slide_id,
            items: tiles,
        })
        .collect();
    let labels: Vec<T> = slides
        .iter()
        .map(|s| if s.melanoma { T::one() } else { T::zero() })
        .collect();

    let lr = T::lit(config.learning_rate);
    let sampling_seed = substream(config.seed, "tile-sampling");
    let shuffle_seed = substream(config.seed, "batch-order");
    let mut weights = vec![T::zero(); dim];
    let mut bias = T::zero();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut skipped = Vec::new();

    for epoch in 0..config.epochs {
        let mut sample =
            sample_tiles_per_slide(&groups, config.quota, child_seed(sampling_seed, epoch as u64))?;
        if epoch == 0 {
            skipped = sample.skipped.iter().map(|s| s.slide_id.clone()).collect();
        }
        sample.draws.shuffle(&mut stream_rng(shuffle_seed, epoch as u64));
        let batch: Vec<(&[T], T)> = sample
            .draws
            .iter()
            .map(|d| (groups[d.group].items[d.item].as_slice(), labels[d.group]))
            .collect();
        let size = config.batch_size.unwrap_or(batch.len()).max(1);
        for chunk in batch.chunks(size) {
            let (_, gw, gb) = logistic_loss_and_gradient(&weights, bias, chunk);
            for (w, g) in weights.iter_mut().zip(gw) {
                *w -= lr * g;
            }
            bias -= lr * gb;
        }
        let (loss, _, _) = logistic_loss_and_gradient(&weights, bias, &batch);
        epoch_losses.push(loss);
    }

    // w . (x - c) / s + b  ==  (w / s) . x + (b - sum w c / s)
    let raw_weights: Vec<T> = weights.iter().zip(&scale).map(|(&w, &s)| w / s).collect();
    let raw_bias = bias - dot(&raw_weights, &center);

    let model = ScorerModel {
        weights: raw_weights,
        bias: raw_bias,
        metadata: ModelMetadata {
            stain,
            magnification,
            training_seed: config.seed,
            epochs: config.epochs,
            learning_rate: config.learning_rate,
            sampling_number: config.quota,
            batch_size: config.batch_size,
            jitter: card.jitter,
            architecture: card.architecture.clone(),
            pooling: card.pooling.clone(),
        },
    };
    model.validate()?;
    Ok(TrainOutcome {
        model,
        epoch_losses,
        skipped_slides: skipped,
    })
}

/// Per-feature mean and standard deviation over all training tiles.
/// Constant features get scale 1.
fn standardization<T: Scalar>(slides: &[TrainingSlide<T>], dim: usize) -> (Vec<T>, Vec<T>) {
    let mut sum = vec![0.0f64; dim];
    let mut sum_sq = vec![0.0f64; dim];
    let mut n = 0usize;
    for f in slides.iter().flat_map(|s| &s.tiles) {
        n += 1;
        for (k, &v) in f.values.iter().enumerate() {
            let v = v.to_f64_lossy();
            sum[k] += v;
            sum_sq[k] += v * v;
        }
    }
    let nf = n.max(1) as f64;
    let center: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let scale: Vec<f64> = sum_sq
        .iter()
        .zip(&center)
        .map(|(sq, c)| {
            let var = (sq / nf - c * c).max(0.0);
            if var.sqrt() > 1e-9 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    (
        center.into_iter().map(T::lit).collect(),
        scale.into_iter().map(T::lit).collect(),
    )
}
