//! The experiment end to end: synthesize, tessellate, train, score,
//! aggregate, fuse and evaluate, driven by one [`PipelineConfig`].
//!
//! Every stage writes its outputs under `out_root` and the standalone stage
//! functions read their inputs back from there, so running the stages one
//! by one produces the same files as [`run`].

mod config;
pub mod data;
pub mod predict;
pub mod report;
pub mod train;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{BootstrapSettings, FusionSettings, PipelineConfig, ScorerConfig};
pub use data::{Cohort, SlideFeatures, SlideRecord};
pub use report::{report_rows, RunReport};
pub use train::{assign_folds, ThresholdsFile, TrainedModels};

use crate::aggregate::{aggregate_slide, read_slide_predictions, write_slide_predictions, SlidePrediction};
use crate::error::{Error, Result};
use crate::evaluation::{auroc, select_threshold, write_report_csv, write_roc_points};
use crate::fusion::{FusionConfig, FusionMode, ModelFusionParams, MultiStainLayout};
use crate::labels::BinaryLabel;
use crate::rng::substream;
use crate::scoring::{import_external_scores, write_tile_scores, ScorerModel, TileScore};
use crate::synth::{generate_cohorts, CohortManifest, Split};
use crate::tiling::{downscale, tessellate, write_tile_manifest, AnnotationMask, Magnification, SlideImage, TileRef};
use crate::Real;

/// Output file locations under `out_root`.
#[derive(Debug, Clone)]
pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OutputLayout { root: root.into() }
    }

    pub fn tile_manifest(&self, cohort_id: &str) -> PathBuf {
        self.root.join("tiles").join(format!("{cohort_id}.csv"))
    }

    pub fn tile_images(&self) -> PathBuf {
        self.root.join("tiles")
    }

    pub fn model(&self, model_id: &str) -> PathBuf {
        self.root.join("models").join(format!("{model_id}.json"))
    }

    pub fn thresholds(&self) -> PathBuf {
        self.root.join("thresholds.json")
    }

    pub fn fusion_config(&self, mode: FusionMode) -> PathBuf {
        self.root.join("fusion").join(format!("{mode}.json"))
    }

    pub fn tile_scores(&self, eval_id: &str) -> PathBuf {
        self.root.join("scores").join(format!("{eval_id}.csv"))
    }

    pub fn slide_predictions(&self, eval_id: &str) -> PathBuf {
        self.root.join("predictions").join(format!("{eval_id}_slides.csv"))
    }

    pub fn fused_predictions(&self, eval_id: &str) -> PathBuf {
        self.root.join("predictions").join(format!("{eval_id}_fused.csv"))
    }

    pub fn report_csv(&self) -> PathBuf {
        self.root.join("report").join("report.csv")
    }

    pub fn report_all_modes_csv(&self) -> PathBuf {
        self.root.join("report").join("report_all_modes.csv")
    }

    pub fn report_text(&self) -> PathBuf {
        self.root.join("report").join("report.txt")
    }

    pub fn roc_points(&self) -> PathBuf {
        self.root.join("report").join("roc_points.csv")
    }

    pub fn run_manifest(&self) -> PathBuf {
        self.root.join("run_manifest.json")
    }
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open_file(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create_file(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut out = create_file(path)?;
    f(&mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Writes the synthetic cohorts under `data_root`. The generator is seeded
/// from the root seed, not from `synth.seed`.
pub fn synthesize(config: &PipelineConfig) -> Result<Vec<CohortManifest>> {
    generate_cohorts(&synth_config(config), &config.data_root)
}

pub fn synth_config(config: &PipelineConfig) -> crate::synth::SynthConfig {
    crate::synth::SynthConfig {
        seed: config.seed,
        ..config.synth.clone()
    }
}

/// Tessellates every slide of every cohort for every scorer and writes one
/// tile manifest per cohort, plus tile images when configured.
pub fn tessellate_cohorts(config: &PipelineConfig) -> Result<BTreeMap<String, Vec<TileRef>>> {
    use rayon::prelude::*;
    let layout = OutputLayout::new(&config.out_root);
    let mut out = BTreeMap::new();
    for cohort in data::load_cohorts(config)? {
        let image_dir = config.write_tile_images.then(|| layout.tile_images().join(&cohort.cohort_id));
        if let Some(d) = &image_dir {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        let per_slide: Vec<Vec<TileRef>> = cohort
            .slides
            .par_iter()
            .map(|record| {
                tessellate_record(config, record, image_dir.as_deref())
                    .map_err(|e| e.in_stage("tessellate", record.slide_id()))
            })
            .collect::<Result<_>>()?;
        let tiles: Vec<TileRef> = per_slide.into_iter().flatten().collect();
        write_with(&layout.tile_manifest(&cohort.cohort_id), |w| write_tile_manifest(w, &tiles))?;
        out.insert(cohort.cohort_id.clone(), tiles);
    }
    Ok(out)
}

fn tessellate_record(config: &PipelineConfig, record: &SlideRecord, image_dir: Option<&Path>) -> Result<Vec<TileRef>> {
    let mask = AnnotationMask::load(&data::data_path(config, &record.entry.annotation))?;
    let mut tiles = Vec::new();
    for stain in crate::tiling::Stain::ALL {
        let scorers: Vec<_> = config.scorers_for(stain).collect();
        if scorers.is_empty() {
            continue;
        }
        let base = SlideImage::load_png(
            &data::data_path(config, record.entry.stains.get(stain)),
            record.slide_id(),
            stain,
            Magnification::X40,
        )?;
        for scorer in scorers {
            let level = downscale(&base, scorer.magnification)?;
            let found = tessellate(&level, &mask, &config.tessellation)?;
            if let Some(dir) = image_dir {
                for t in &found {
                    crate::tiling::save_tile_png(&level.crop(t), &dir.join(t.file_name()))?;
                }
            }
            tiles.extend(found);
        }
    }
    Ok(tiles)
}

/// Trained or imported models with their validation-derived parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet {
    /// Empty when tile scores come from an external file.
    pub models: Vec<ScorerModel<Real>>,
    pub thresholds: ThresholdsFile,
    /// One fusion configuration per mode, in [`FusionMode::ALL`] order.
    pub fusion: Vec<FusionConfig<Real>>,
}

impl ModelSet {
    pub fn fusion_config(&self, mode: FusionMode) -> &FusionConfig<Real> {
        self.fusion.iter().find(|f| f.mode == mode).expect("every mode is configured")
    }
}

/// Fusion configurations for every mode. The two-level layout also needs
/// the validation AUROC of the pre-fused MelanA score, which depends on
/// the mode.
fn build_fusion_configs(
    config: &PipelineConfig,
    params: &[ModelFusionParams<Real>],
    validation: &BTreeMap<String, Vec<(String, Real)>>,
    labels: &BTreeMap<&str, BinaryLabel>,
) -> Result<Vec<FusionConfig<Real>>> {
    FusionMode::ALL
        .into_iter()
        .map(|mode| {
            let mut fc = predict::fusion_config(config, params, mode)?;
            if config.fusion.layout == MultiStainLayout::TwoLevel {
                let fused = predict::fuse_oof_melana(config, validation, &fc)?;
                let cohort = train::oof_cohort("MelanA-combined", &fused, labels)?;
                fc.models.push(train::combined_melana_params(auroc(&cohort)?));
                fc.normalize()?;
            }
            Ok(fc)
        })
        .collect()
}

fn training_records(cohorts: &[Cohort], config: &PipelineConfig) -> Vec<SlideRecord> {
    cohorts
        .iter()
        .filter(|c| c.cohort_id == config.training_cohort)
        .flat_map(|c| c.slides.iter().filter(|s| s.split() == Split::Train).cloned())
        .collect()
}

fn save_model_set(config: &PipelineConfig, set: &ModelSet) -> Result<()> {
    let layout = OutputLayout::new(&config.out_root);
    for m in &set.models {
        write_json(&layout.model(&m.model_id()), m)?;
    }
    write_json(&layout.thresholds(), &set.thresholds)?;
    for fc in &set.fusion {
        write_json(&layout.fusion_config(fc.mode), fc)?;
    }
    Ok(())
}

/// Trains every scorer on the training split, selects thresholds on
/// out-of-fold predictions and writes models, thresholds and fusion
/// configurations. With external scores, thresholds come from the
/// training split's slide scores and no model is trained.
pub fn train_stage(config: &PipelineConfig, cohorts: &[Cohort]) -> Result<ModelSet> {
    let records = training_records(cohorts, config);
    let refs: Vec<&SlideRecord> = records.iter().collect();
    let labels: BTreeMap<&str, BinaryLabel> = records.iter().map(|r| (r.slide_id(), r.label)).collect();
    let set = match &config.external_scores {
        None => {
            let layout = OutputLayout::new(&config.out_root);
            let image_dir = config.write_tile_images.then(|| layout.tile_images());
            let features = data::extract_all(config, &refs, |_| true, image_dir.as_deref())?;
            let trained = train::train_models(config, &refs, &features)?;
            let fusion = build_fusion_configs(config, &trained.fusion_params, &trained.oof_scores, &labels)?;
            ModelSet {
                thresholds: ThresholdsFile {
                    source_cohort: format!("{}:validation", config.training_cohort),
                    folds: trained.folds.clone(),
                    thresholds: trained.thresholds.clone(),
                    fusion_params: trained.fusion_params.clone(),
                },
                models: trained.models,
                fusion,
            }
        }
        Some(path) => {
            let scores = load_external(path)?;
            let grouped = predict::group_tile_scores(&scores);
            let mut validation: BTreeMap<String, Vec<(String, Real)>> = BTreeMap::new();
            let mut thresholds = Vec::new();
            let mut params = Vec::new();
            for scorer in &config.scorers {
                let id = scorer.model_id();
                let mut slide_scores = Vec::new();
                for r in &records {
                    let tiles = grouped
                        .get(&(r.slide_id().to_string(), id.clone()))
                        .map(Vec::as_slice)
                        .unwrap_or(&[]);
                    let p = aggregate_slide(r.slide_id(), scorer.stain.into(), &id, tiles)
                        .map_err(|e| e.in_stage("train", r.slide_id()))?;
                    slide_scores.push((r.slide_id().to_string(), p.score));
                }
                slide_scores.sort_by(|a, b| a.0.cmp(&b.0));
                let cohort = train::oof_cohort(&id, &slide_scores, &labels)?;
                let t = select_threshold(&cohort)?;
                params.push(ModelFusionParams {
                    model_id: id.clone(),
                    threshold: t.value,
                    validation_auroc: auroc(&cohort)?,
                });
                thresholds.push(t);
                validation.insert(id, slide_scores);
            }
            let fusion = build_fusion_configs(config, &params, &validation, &labels)?;
            ModelSet {
                models: Vec::new(),
                thresholds: ThresholdsFile {
                    source_cohort: format!("{}:train", config.training_cohort),
                    folds: BTreeMap::new(),
                    thresholds,
                    fusion_params: params,
                },
                fusion,
            }
        }
    };
    save_model_set(config, &set)?;
    Ok(set)
}

/// Reads back what [`train_stage`] wrote.
pub fn load_model_set(config: &PipelineConfig) -> Result<ModelSet> {
    let layout = OutputLayout::new(&config.out_root);
    let models = if config.external_scores.is_some() {
        Vec::new()
    } else {
        config
            .scorers
            .iter()
            .map(|s| ScorerModel::load(&layout.model(&s.model_id())))
            .collect::<Result<_>>()?
    };
    let thresholds: ThresholdsFile = read_json(&layout.thresholds())?;
    let fusion = FusionMode::ALL
        .into_iter()
        .map(|mode| FusionConfig::load(&layout.fusion_config(mode)))
        .collect::<Result<_>>()?;
    Ok(ModelSet {
        models,
        thresholds,
        fusion,
    })
}

fn load_external(path: &Path) -> Result<Vec<TileScore<Real>>> {
    import_external_scores(open_file(path)?, &path.display().to_string())
}

/// Slides evaluated per cohort, keyed by evaluation id in config order.
fn evaluated(config: &PipelineConfig, cohorts: &[Cohort]) -> Vec<(String, Vec<SlideRecord>)> {
    cohorts
        .iter()
        .map(|c| (c.evaluation_id(config), c.evaluated(config).cloned().collect()))
        .collect()
}

/// Tile scores of every evaluated slide, written to `scores/<cohort>.csv`.
pub fn score_stage(
    config: &PipelineConfig,
    cohorts: &[Cohort],
    models: &ModelSet,
) -> Result<Vec<(String, Vec<TileScore<Real>>)>> {
    let layout = OutputLayout::new(&config.out_root);
    let external = match &config.external_scores {
        Some(path) => Some(load_external(path)?),
        None => None,
    };
    let mut out = Vec::new();
    for (eval_id, records) in evaluated(config, cohorts) {
        let scores = match &external {
            Some(all) => {
                let ids: std::collections::BTreeSet<&str> = records.iter().map(|r| r.slide_id()).collect();
                all.iter()
                    .filter(|s| ids.contains(s.tile.slide_id.as_str()))
                    .cloned()
                    .collect()
            }
            None => {
                let refs: Vec<&SlideRecord> = records.iter().collect();
                let image_dir = config.write_tile_images.then(|| layout.tile_images());
                let features = data::extract_all(config, &refs, |_| false, image_dir.as_deref())?;
                let tiles: Vec<TileRef> = features
                    .iter()
                    .flat_map(|f| f.models.values().flat_map(|m| m.tiles.iter().cloned()))
                    .collect();
                write_with(&layout.tile_manifest(&eval_id), |w| write_tile_manifest(w, &tiles))?;
                predict::score_tiles(&models.models, &features)?
            }
        };
        write_with(&layout.tile_scores(&eval_id), |w| write_tile_scores(w, &scores))?;
        out.push((eval_id, scores));
    }
    Ok(out)
}

/// Reads back what [`score_stage`] wrote.
pub fn load_tile_scores(config: &PipelineConfig, cohorts: &[Cohort]) -> Result<Vec<(String, Vec<TileScore<Real>>)>> {
    let layout = OutputLayout::new(&config.out_root);
    evaluated(config, cohorts)
        .into_iter()
        .map(|(eval_id, _)| {
            let path = layout.tile_scores(&eval_id);
            let scores = import_external_scores(open_file(&path)?, &path.display().to_string())?;
            Ok((eval_id, scores))
        })
        .collect()
}

fn single_model_ids(config: &PipelineConfig) -> Vec<(String, crate::tiling::Stain)> {
    config.scorers.iter().map(|s| (s.model_id(), s.stain)).collect()
}

/// Slide scores with bootstrap CIs, written to `predictions/<cohort>_slides.csv`.
pub fn aggregate_stage(
    config: &PipelineConfig,
    cohorts: &[Cohort],
    scores: &[(String, Vec<TileScore<Real>>)],
) -> Result<Vec<(String, Vec<SlidePrediction<Real>>)>> {
    let layout = OutputLayout::new(&config.out_root);
    let ids = single_model_ids(config);
    evaluated(config, cohorts)
        .into_iter()
        .zip(scores)
        .map(|((eval_id, records), (_, tile_scores))| {
            let refs: Vec<&SlideRecord> = records.iter().collect();
            let grouped = predict::group_tile_scores(tile_scores);
            let preds = predict::aggregate_cohort(config, &refs, &ids, &grouped)?;
            write_with(&layout.slide_predictions(&eval_id), |w| write_slide_predictions(w, &preds))?;
            Ok((eval_id, preds))
        })
        .collect()
}

fn load_predictions(path: &Path) -> Result<Vec<SlidePrediction<Real>>> {
    read_slide_predictions(open_file(path)?, &path.display().to_string())
}

/// Reads back what [`aggregate_stage`] wrote.
pub fn load_slide_predictions(
    config: &PipelineConfig,
    cohorts: &[Cohort],
) -> Result<Vec<(String, Vec<SlidePrediction<Real>>)>> {
    let layout = OutputLayout::new(&config.out_root);
    evaluated(config, cohorts)
        .into_iter()
        .map(|(eval_id, _)| Ok((eval_id.clone(), load_predictions(&layout.slide_predictions(&eval_id))?)))
        .collect()
}

/// Fused and hierarchical predictions under every mode, written to
/// `predictions/<cohort>_fused.csv`.
pub fn fuse_stage(
    config: &PipelineConfig,
    models: &ModelSet,
    singles: &[(String, Vec<SlidePrediction<Real>>)],
) -> Result<Vec<(String, Vec<SlidePrediction<Real>>)>> {
    let layout = OutputLayout::new(&config.out_root);
    singles
        .iter()
        .map(|(eval_id, preds)| {
            let mut fused = Vec::new();
            for fc in &models.fusion {
                fused.extend(predict::fuse_cohort(config, preds, fc)?);
            }
            write_with(&layout.fused_predictions(eval_id), |w| write_slide_predictions(w, &fused))?;
            Ok((eval_id.clone(), fused))
        })
        .collect()
}

/// Reads back what [`fuse_stage`] wrote.
pub fn load_fused_predictions(
    config: &PipelineConfig,
    cohorts: &[Cohort],
) -> Result<Vec<(String, Vec<SlidePrediction<Real>>)>> {
    let layout = OutputLayout::new(&config.out_root);
    evaluated(config, cohorts)
        .into_iter()
        .map(|(eval_id, _)| Ok((eval_id.clone(), load_predictions(&layout.fused_predictions(&eval_id))?)))
        .collect()
}

/// Evaluates single and fused predictions per cohort and writes the report
/// files.
pub fn evaluate_stage(
    config: &PipelineConfig,
    singles: &[(String, Vec<SlidePrediction<Real>>)],
    fused: &[(String, Vec<SlidePrediction<Real>>)],
) -> Result<RunReport> {
    let layout = OutputLayout::new(&config.out_root);
    let cohorts: Vec<(String, Vec<SlidePrediction<Real>>)> = singles
        .iter()
        .zip(fused)
        .map(|((id, s), (_, f))| (id.clone(), s.iter().chain(f).cloned().collect()))
        .collect();
    let report = report::build_report(config, &cohorts)?;

    let rows = report.table.rows();
    write_with(&layout.report_csv(), |w| write_report_csv(w, &rows))?;
    let all = report.all_rows();
    let all_refs: Vec<_> = all.iter().collect();
    write_with(&layout.report_all_modes_csv(), |w| write_report_csv(w, &all_refs))?;
    let text_path = layout.report_text();
    let text = report.table.to_text();
    write_with(&text_path, |w| w.write_all(text.as_bytes()).map_err(|e| Error::io(&text_path, e)))?;
    let curves: Vec<(&str, &crate::evaluation::RocResult<Real>)> = report
        .table
        .rows()
        .iter()
        .filter_map(|r| report.result(&r.model_id, &r.cohort_id).map(|res| (r.model_id.as_str(), res)))
        .collect();
    write_with(&layout.roc_points(), |w| write_roc_points(w, &curves))?;
    Ok(report)
}

/// Record of one run: config digest, seeds and the hash of every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_sha256: String,
    pub seed: u64,
    pub seeds: BTreeMap<String, u64>,
    pub folds: BTreeMap<String, usize>,
    /// Path relative to `out_root` and its SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Writes `run_manifest.json` covering every file currently under `out_root`.
pub fn write_run_manifest(config: &PipelineConfig, folds: &BTreeMap<String, usize>) -> Result<RunManifest> {
    let layout = OutputLayout::new(&config.out_root);
    let manifest_path = layout.run_manifest();
    let mut files = Vec::new();
    collect_files(&config.out_root, &mut files)?;
    files.retain(|p| *p != manifest_path);
    files.sort();
    let mut artifacts = BTreeMap::new();
    for f in files {
        let rel = f.strip_prefix(&config.out_root).unwrap_or(&f);
        let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        artifacts.insert(key, file_sha256(&f)?);
    }
    let seeds = ["synthesis", "training", "folds", "jitter", "slide-bootstrap", "cohort-bootstrap"]
        .into_iter()
        .map(|name| (name.to_string(), substream(config.seed, name)))
        .collect();
    let manifest = RunManifest {
        config_sha256: config.digest()?,
        seed: config.seed,
        seeds,
        folds: folds.clone(),
        artifacts,
    };
    write_json(&manifest_path, &manifest)?;
    Ok(manifest)
}

/// Everything [`run`] produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: RunReport,
    pub models: ModelSet,
    /// Single-model slide predictions per evaluated cohort.
    pub slide_predictions: Vec<(String, Vec<SlidePrediction<Real>>)>,
    /// Fused and hierarchical predictions per evaluated cohort.
    pub fused_predictions: Vec<(String, Vec<SlidePrediction<Real>>)>,
    pub manifest: RunManifest,
}

/// Runs every stage after synthesis. The cohort manifests must exist.
pub fn run(config: &PipelineConfig) -> Result<RunSummary> {
    config.validate()?;
    let cohorts = data::load_cohorts(config)?;
    log::info!("training on {} ({} cohorts)", config.training_cohort, cohorts.len());
    let models = train_stage(config, &cohorts)?;
    log::info!("scoring tiles");
    let scores = score_stage(config, &cohorts, &models)?;
    let slide_predictions = aggregate_stage(config, &cohorts, &scores)?;
    let fused_predictions = fuse_stage(config, &models, &slide_predictions)?;
    log::info!("evaluating");
    let report = evaluate_stage(config, &slide_predictions, &fused_predictions)?;
    let manifest = write_run_manifest(config, &models.thresholds.folds)?;
    Ok(RunSummary {
        report,
        models,
        slide_predictions,
        fused_predictions,
        manifest,
    })
}
