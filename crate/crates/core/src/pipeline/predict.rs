//! Tile scoring, slide aggregation and fusion for one cohort.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::data::{SlideFeatures, SlideRecord};
use super::PipelineConfig;
use crate::aggregate::{aggregate_with_ci, Modality, SlidePrediction};
use crate::error::{Error, Result};
use crate::fusion::{fuse, fuse_multistain, hierarchical_predict, FusionConfig, FusionMode, ModelFusionParams};
use crate::rng::substream;
use crate::scoring::{ScorerModel, TileScore};
use crate::tiling::Stain;
use crate::Real;

pub fn melana_fused_id(mode: FusionMode) -> String {
    format!("fused:{mode}:melana")
}

pub fn multistain_id(mode: FusionMode) -> String {
    format!("fused:{mode}:he+melana")
}

pub fn hierarchical_id(mode: FusionMode) -> String {
    format!("hierarchical:{mode}")
}

/// Tile scores of every slide under every model, in slide then model order.
pub fn score_tiles(models: &[ScorerModel<Real>], features: &[SlideFeatures]) -> Result<Vec<TileScore<Real>>> {
    let per_slide: Vec<Vec<TileScore<Real>>> = features
        .par_iter()
        .map(|slide| {
            let mut out = Vec::new();
            for model in models {
                let id = model.model_id();
                let Some(m) = slide.models.get(&id) else { continue };
                for (tile, f) in m.tiles.iter().zip(&m.features) {
                    let score = model.score(f).map_err(|e| e.in_stage("score", &slide.slide_id))?;
                    out.push(TileScore {
                        tile: tile.clone(),
                        score,
                        model_id: id.clone(),
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_slide.into_iter().flatten().collect())
}

/// Groups tile scores by `(slide_id, model_id)`.
pub fn group_tile_scores(scores: &[TileScore<Real>]) -> BTreeMap<(String, String), Vec<Real>> {
    let mut out: BTreeMap<(String, String), Vec<Real>> = BTreeMap::new();
    for s in scores {
        out.entry((s.tile.slide_id.clone(), s.model_id.clone()))
            .or_default()
            .push(s.score);
    }
    out
}

/// Slide predictions with bootstrap CIs for every slide and single model.
pub fn aggregate_cohort(
    config: &PipelineConfig,
    records: &[&SlideRecord],
    model_ids: &[(String, Stain)],
    tile_scores: &BTreeMap<(String, String), Vec<Real>>,
) -> Result<Vec<SlidePrediction<Real>>> {
    let boot_root = substream(config.seed, "slide-bootstrap");
    let jobs: Vec<(&SlideRecord, &(String, Stain))> = records
        .iter()
        .flat_map(|r| model_ids.iter().map(move |m| (*r, m)))
        .collect();
    jobs.par_iter()
        .map(|(record, (model_id, stain))| {
            let key = (record.slide_id().to_string(), model_id.clone());
            let scores = tile_scores.get(&key).map(Vec::as_slice).unwrap_or(&[]);
            let seed = substream(boot_root, &format!("{model_id}/{}", record.slide_id()));
            let mut pred = aggregate_with_ci(
                record.slide_id(),
                Modality::from(*stain),
                model_id,
                scores,
                &config.slide_bootstrap(seed),
            )
            .map_err(|e| e.in_stage("aggregate", record.slide_id()))?;
            pred.label = Some(record.label);
            Ok(pred)
        })
        .collect()
}

/// Fusion configuration for one mode built from per-model validation
/// parameters.
pub fn fusion_config(
    config: &PipelineConfig,
    params: &[ModelFusionParams<Real>],
    mode: FusionMode,
) -> Result<FusionConfig<Real>> {
    let mut fc = FusionConfig::new(mode, params.to_vec())?;
    fc.layout = config.fusion.layout;
    Ok(fc)
}

/// Fused MelanA, fused H&E + MelanA and hierarchical predictions of every
/// slide, for one fusion mode.
pub fn fuse_cohort(
    config: &PipelineConfig,
    singles: &[SlidePrediction<Real>],
    fusion: &FusionConfig<Real>,
) -> Result<Vec<SlidePrediction<Real>>> {
    let he_id = config
        .scorers_for(Stain::HE)
        .next()
        .map(|s| s.model_id())
        .ok_or_else(|| Error::InvalidInput("no H&E scorer".into()))?;
    let he_threshold = fusion
        .model(&he_id)
        .ok_or_else(|| Error::UnknownModel(he_id.clone()))?
        .threshold;
    let melana_ids: Vec<String> = config.scorers_for(Stain::MelanA).map(|s| s.model_id()).collect();

    let mut by_slide: BTreeMap<&str, Vec<&SlidePrediction<Real>>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for p in singles {
        let e = by_slide.entry(p.slide_id.as_str()).or_default();
        if e.is_empty() {
            order.push(p.slide_id.as_str());
        }
        e.push(p);
    }
    let mode = fusion.mode;
    let mut out = Vec::with_capacity(order.len() * 3);
    for slide_id in order {
        let preds = &by_slide[slide_id];
        let wrap = |e: Error| e.in_stage("fuse", slide_id);
        let he = preds
            .iter()
            .find(|p| p.model_id == he_id)
            .ok_or_else(|| wrap(Error::UnknownModel(he_id.clone())))?;
        let melana: Vec<SlidePrediction<Real>> = melana_ids
            .iter()
            .filter_map(|id| preds.iter().find(|p| &p.model_id == id).map(|p| (*p).clone()))
            .collect();
        let n_melana_tiles: usize = melana.iter().map(|p| p.n_tiles).sum();

        let fused_ma = fuse(&melana, fusion).map_err(wrap)?;
        out.push(fused_ma.to_slide_prediction(&melana_fused_id(mode), Modality::MelanA, n_melana_tiles, he.label));
        let both = fuse_multistain(he, &melana, fusion).map_err(wrap)?;
        out.push(both.to_slide_prediction(
            &multistain_id(mode),
            Modality::Combined,
            he.n_tiles + n_melana_tiles,
            he.label,
        ));
        let gated = hierarchical_predict(he, he_threshold, &melana, fusion).map_err(wrap)?;
        let n_tiles = if gated.contributions.len() == 1 { he.n_tiles } else { he.n_tiles + n_melana_tiles };
        out.push(gated.to_slide_prediction(&hierarchical_id(mode), Modality::Combined, n_tiles, he.label));
    }
    Ok(out)
}

/// Out-of-fold fused MelanA scores, used as the validation AUROC of the
/// pre-fused MelanA score in the two-level layout.
pub(crate) fn fuse_oof_melana(
    config: &PipelineConfig,
    oof: &BTreeMap<String, Vec<(String, Real)>>,
    fusion: &FusionConfig<Real>,
) -> Result<Vec<(String, Real)>> {
    let melana_ids: Vec<String> = config.scorers_for(Stain::MelanA).map(|s| s.model_id()).collect();
    let slides: Vec<&String> = oof[&melana_ids[0]].iter().map(|(id, _)| id).collect();
    slides
        .into_iter()
        .map(|slide_id| {
            let preds: Vec<SlidePrediction<Real>> = melana_ids
                .iter()
                .filter_map(|m| {
                    oof[m].iter().find(|(id, _)| id == slide_id).map(|(_, score)| SlidePrediction {
                        slide_id: slide_id.clone(),
                        stain: Modality::MelanA,
                        model_id: m.clone(),
                        score: *score,
                        n_tiles: 0,
                        ci: None,
                        label: None,
                    })
                })
                .collect();
            Ok((slide_id.clone(), fuse(&preds, fusion)?.score))
        })
        .collect()
}
