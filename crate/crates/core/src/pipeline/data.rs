//! Cohort loading and per-slide feature extraction.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::PipelineConfig;
use crate::error::{Error, Result};
use crate::labels::BinaryLabel;
use crate::rng::substream;
use crate::scoring::{color_jitter, extract_features, FeatureVector};
use crate::synth::{CohortManifest, ManifestEntry, Split};
use crate::tiling::{downscale, tessellate, AnnotationMask, Magnification, SlideImage, Stain, TileRef};
use crate::Real;

/// A manifest entry with its binary label under the configured in-situ policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SlideRecord {
    pub cohort_id: String,
    pub entry: ManifestEntry,
    pub label: BinaryLabel,
}

impl SlideRecord {
    pub fn slide_id(&self) -> &str {
        &self.entry.slide_id
    }

    pub fn split(&self) -> Split {
        self.entry.split
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub cohort_id: String,
    pub slides: Vec<SlideRecord>,
}

impl Cohort {
    /// Name under which the cohort is evaluated. The training cohort is
    /// evaluated on its holdout split only.
    pub fn evaluation_id(&self, config: &PipelineConfig) -> String {
        if self.cohort_id == config.training_cohort {
            format!("{}-holdout", self.cohort_id)
        } else {
            self.cohort_id.clone()
        }
    }

    pub fn evaluated<'a>(&'a self, config: &PipelineConfig) -> impl Iterator<Item = &'a SlideRecord> + 'a {
        let is_training = self.cohort_id == config.training_cohort;
        self.slides
            .iter()
            .filter(move |s| !is_training || s.split() == Split::Holdout)
    }
}

/// Loads every configured cohort manifest. In-situ slides excluded by the
/// policy are dropped.
pub fn load_cohorts(config: &PipelineConfig) -> Result<Vec<Cohort>> {
    let mut seen = BTreeMap::new();
    config
        .cohorts
        .iter()
        .map(|id| {
            let path = CohortManifest::path_in(&config.data_root, id);
            let manifest = CohortManifest::load(&path)?;
            let slides = manifest
                .entries
                .into_iter()
                .filter_map(|entry| {
                    entry.label.to_binary(config.in_situ_policy).map(|label| SlideRecord {
                        cohort_id: id.clone(),
                        entry,
                        label,
                    })
                })
                .collect::<Vec<_>>();
            for s in &slides {
                if let Some(other) = seen.insert(s.slide_id().to_string(), id.clone()) {
                    return Err(Error::InvalidInput(format!(
                        "slide {} appears in cohorts {other} and {id}",
                        s.slide_id()
                    )));
                }
            }
            Ok(Cohort {
                cohort_id: id.clone(),
                slides,
            })
        })
        .collect()
}

/// Tiles and their features for one scorer on one slide.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelTiles {
    pub tiles: Vec<TileRef>,
    pub features: Vec<FeatureVector<Real>>,
    /// Features of color-jittered copies, training slides only.
    pub views: Vec<FeatureVector<Real>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlideFeatures {
    pub slide_id: String,
    /// Keyed by model id.
    pub models: BTreeMap<String, ModelTiles>,
}

/// Resolves a manifest path against the data root.
pub(crate) fn data_path(config: &PipelineConfig, relative: &Path) -> PathBuf {
    config.data_root.join(relative)
}

fn jitter_seed(root: u64, tile: &TileRef, view: usize) -> u64 {
    substream(
        root,
        &format!("{}/{}/{}/{}/{}/{view}", tile.slide_id, tile.stain, tile.magnification, tile.grid_x, tile.grid_y),
    )
}

/// Tessellates one slide at every configured magnification and extracts
/// tile features. Training slides also get `jitter_views` jittered copies
/// of every tile.
pub fn extract_slide(
    config: &PipelineConfig,
    record: &SlideRecord,
    with_views: bool,
    tile_image_dir: Option<&Path>,
) -> Result<SlideFeatures> {
    let slide_id = record.slide_id();
    let mask = AnnotationMask::load(&data_path(config, &record.entry.annotation))?;
    let jitter_root = substream(config.seed, "jitter");
    let mut models = BTreeMap::new();
    for stain in Stain::ALL {
        let scorers: Vec<_> = config.scorers_for(stain).collect();
        if scorers.is_empty() {
            continue;
        }
        let base = SlideImage::load_png(
            &data_path(config, record.entry.stains.get(stain)),
            slide_id,
            stain,
            Magnification::X40,
        )?;
        for scorer in scorers {
            let level = downscale(&base, scorer.magnification)?;
            let tiles = tessellate(&level, &mask, &config.tessellation)?;
            let mut out = ModelTiles::default();
            for tile in &tiles {
                let pixels = level.crop(tile);
                if let Some(dir) = tile_image_dir {
                    crate::tiling::save_tile_png(&pixels, &dir.join(tile.file_name()))?;
                }
                out.features.push(extract_features(&pixels)?);
                if with_views {
                    for v in 0..config.jitter_views {
                        let jittered = color_jitter(&pixels, &config.jitter, jitter_seed(jitter_root, tile, v))?;
                        out.views.push(extract_features(&jittered)?);
                    }
                }
            }
            out.tiles = tiles;
            models.insert(scorer.model_id(), out);
        }
    }
    Ok(SlideFeatures {
        slide_id: slide_id.to_string(),
        models,
    })
}

/// Feature extraction over many slides in parallel; output follows input order.
pub fn extract_all(
    config: &PipelineConfig,
    records: &[&SlideRecord],
    with_views: impl Fn(&SlideRecord) -> bool + Sync,
    tile_image_dir: Option<&Path>,
) -> Result<Vec<SlideFeatures>> {
    records
        .par_iter()
        .map(|r| {
            let dir = match tile_image_dir {
                Some(d) => {
                    let d = d.join(&r.cohort_id);
                    std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
                    Some(d)
                }
                None => None,
            };
            extract_slide(config, r, with_views(r), dir.as_deref())
                .map_err(|e| e.in_stage("tessellate", r.slide_id()))
        })
        .collect()
}
