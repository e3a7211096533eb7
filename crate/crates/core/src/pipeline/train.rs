//! Cross-validated thresholds and final scorer training.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{SlideFeatures, SlideRecord};
use super::{PipelineConfig, ScorerConfig};
use crate::aggregate::aggregate_slide;
use crate::error::{Error, Result};
use crate::evaluation::{auroc, select_threshold, CohortEntry, CohortPredictions, DecisionThreshold};
use crate::fusion::{ModelFusionParams, MELANA_COMBINED_ID};
use crate::rng::{child_seed, stream_rng, substream};
use crate::scoring::{train_baseline_scorer, ModelCard, ScorerModel, TrainConfig, TrainingSlide};
use crate::Real;

/// Stratified fold assignment: within each class, slide ids are sorted,
/// shuffled and dealt round-robin.
pub fn assign_folds(slides: &[(&str, bool)], folds: usize, seed: u64) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for (class, positive) in [(0u64, true), (1, false)] {
        let mut ids: Vec<&str> = slides.iter().filter(|s| s.1 == positive).map(|s| s.0).collect();
        ids.sort_unstable();
        ids.shuffle(&mut stream_rng(seed, class));
        for (i, id) in ids.into_iter().enumerate() {
            out.insert(id.to_string(), i % folds);
        }
    }
    out
}

fn training_slides(
    scorer: &ScorerConfig,
    records: &[&SlideRecord],
    features: &[SlideFeatures],
    keep: impl Fn(&str) -> bool,
) -> Vec<TrainingSlide<Real>> {
    let id = scorer.model_id();
    records
        .iter()
        .zip(features)
        .filter(|(r, _)| keep(r.slide_id()))
        .map(|(r, f)| {
            let m = &f.models[&id];
            TrainingSlide {
                slide_id: r.slide_id().to_string(),
                melanoma: r.label.is_positive(),
                tiles: m.features.iter().chain(&m.views).cloned().collect(),
            }
        })
        .collect()
}

fn train_one(
    scorer: &ScorerConfig,
    config: &PipelineConfig,
    slides: &[TrainingSlide<Real>],
    seed: u64,
) -> Result<ScorerModel<Real>> {
    let train_config = TrainConfig {
        epochs: scorer.epochs,
        learning_rate: scorer.learning_rate,
        quota: scorer.sampling_number,
        batch_size: scorer.batch_size,
        seed,
    };
    let card = ModelCard {
        jitter: (config.jitter_views > 0).then_some(config.jitter),
        architecture: scorer.architecture.clone(),
        pooling: scorer.pooling.clone(),
    };
    let outcome = train_baseline_scorer(slides, &train_config, scorer.stain, scorer.magnification, &card)?;
    for id in &outcome.skipped_slides {
        log::warn!("{}: slide {id} has no tiles and was skipped in training", scorer.model_id());
    }
    Ok(outcome.model)
}

/// Mean tile score of a slide under a model.
pub(crate) fn slide_score(model: &ScorerModel<Real>, slide: &SlideFeatures) -> Result<Real> {
    let id = model.model_id();
    let tiles = slide.models.get(&id).map(|m| m.features.as_slice()).unwrap_or(&[]);
    let scores = tiles.iter().map(|f| model.score(f)).collect::<Result<Vec<_>>>()?;
    Ok(aggregate_slide(&slide.slide_id, model.metadata.stain.into(), &id, &scores)?.score)
}

/// Output of the training stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModels {
    pub models: Vec<ScorerModel<Real>>,
    pub thresholds: Vec<DecisionThreshold<Real>>,
    /// Threshold and validation AUROC of every scorer.
    pub fusion_params: Vec<ModelFusionParams<Real>>,
    pub folds: BTreeMap<String, usize>,
    /// Out-of-fold slide scores per model id.
    pub oof_scores: BTreeMap<String, Vec<(String, Real)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdsFile {
    pub source_cohort: String,
    pub folds: BTreeMap<String, usize>,
    pub thresholds: Vec<DecisionThreshold<Real>>,
    pub fusion_params: Vec<ModelFusionParams<Real>>,
}

pub(crate) fn training_seed(config: &PipelineConfig, model_id: &str) -> u64 {
    substream(substream(config.seed, "training"), model_id)
}

/// Runs k-fold cross-validation on the training slides to get
/// out-of-fold slide scores, picks each scorer's Youden threshold on them,
/// then trains every scorer on all training slides.
pub fn train_models(
    config: &PipelineConfig,
    records: &[&SlideRecord],
    features: &[SlideFeatures],
) -> Result<TrainedModels> {
    let labels: Vec<(&str, bool)> = records.iter().map(|r| (r.slide_id(), r.label.is_positive())).collect();
    let folds = assign_folds(&labels, config.validation_folds, substream(config.seed, "folds"));
    let k = config.validation_folds;

    // (scorer, fold) jobs; fold == k is the final model
    let jobs: Vec<(usize, usize)> = (0..config.scorers.len())
        .flat_map(|s| (0..=k).map(move |f| (s, f)))
        .collect();
    let trained: Vec<(usize, usize, ScorerModel<Real>)> = jobs
        .par_iter()
        .map(|&(s, fold)| {
            let scorer = &config.scorers[s];
            let seed = child_seed(training_seed(config, &scorer.model_id()), fold as u64);
            let slides = training_slides(scorer, records, features, |id| fold == k || folds[id] != fold);
            let model = train_one(scorer, config, &slides, seed)
                .map_err(|e| Error::Stage {
                    stage: "train",
                    slide_id: format!("{} fold {fold}", scorer.model_id()),
                    source: Box::new(e),
                })?;
            Ok((s, fold, model))
        })
        .collect::<Result<_>>()?;

    let mut oof_scores: BTreeMap<String, Vec<(String, Real)>> = BTreeMap::new();
    let mut models = Vec::new();
    for (s, fold, model) in &trained {
        let id = config.scorers[*s].model_id();
        if *fold == k {
            models.push(model.clone());
            continue;
        }
        for (r, f) in records.iter().zip(features) {
            if folds[r.slide_id()] == *fold {
                let score = slide_score(model, f).map_err(|e| e.in_stage("validate", r.slide_id()))?;
                oof_scores.entry(id.clone()).or_default().push((r.slide_id().to_string(), score));
            }
        }
    }
    for scores in oof_scores.values_mut() {
        scores.sort_by(|a, b| a.0.cmp(&b.0));
    }

    let label_of: BTreeMap<&str, _> = records.iter().map(|r| (r.slide_id(), r.label)).collect();
    let mut thresholds = Vec::new();
    let mut fusion_params = Vec::new();
    for scorer in &config.scorers {
        let id = scorer.model_id();
        let cohort = oof_cohort(&id, &oof_scores[&id], &label_of)?;
        let t = select_threshold(&cohort)?;
        fusion_params.push(ModelFusionParams {
            model_id: id.clone(),
            threshold: t.value,
            validation_auroc: auroc(&cohort)?,
        });
        thresholds.push(t);
    }
    Ok(TrainedModels {
        models,
        thresholds,
        fusion_params,
        folds,
        oof_scores,
    })
}

pub(crate) fn oof_cohort(
    name: &str,
    scores: &[(String, Real)],
    labels: &BTreeMap<&str, crate::labels::BinaryLabel>,
) -> Result<CohortPredictions<Real>> {
    CohortPredictions::new(
        format!("{name}:validation"),
        scores
            .iter()
            .map(|(id, s)| CohortEntry::new(id.clone(), *s, labels[id.as_str()]))
            .collect(),
    )
}

/// Validation parameters for the pre-fused MelanA score used by the
/// two-level layout: its threshold is 0.5 by construction.
pub(crate) fn combined_melana_params(validation_auroc: Real) -> ModelFusionParams<Real> {
    ModelFusionParams {
        model_id: MELANA_COMBINED_ID.to_string(),
        threshold: 0.5,
        validation_auroc,
    }
}
