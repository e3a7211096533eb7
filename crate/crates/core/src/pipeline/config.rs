use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fusion::{FusionMode, MultiStainLayout};
use crate::labels::InSituPolicy;
use crate::scoring::{model_id, JitterParams};
use crate::stats::BootstrapConfig;
use crate::synth::SynthConfig;
use crate::tiling::{Magnification, Stain, TessellationParams};

/// Training settings of one stain/magnification scorer. The architecture and
/// pooling fields are carried into the model card only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    pub stain: Stain,
    pub magnification: Magnification,
    pub epochs: usize,
    pub learning_rate: f64,
    pub sampling_number: usize,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub architecture: Option<String>,
    #[serde(default)]
    pub pooling: Option<String>,
}

impl ScorerConfig {
    pub fn model_id(&self) -> String {
        model_id(self.stain, self.magnification)
    }

    /// The five scorers: H&E at 40x and MelanA at every magnification.
    pub fn defaults() -> Vec<ScorerConfig> {
        let make = |stain, magnification, architecture: &str, sampling_number| ScorerConfig {
            stain,
            magnification,
            epochs: 40,
            learning_rate: 0.5,
            sampling_number,
            batch_size: Some(256),
            architecture: Some(architecture.to_string()),
            pooling: Some("catavgmax".to_string()),
        };
        vec![
            make(Stain::HE, Magnification::X40, "resnet18", 598),
            make(Stain::MelanA, Magnification::X40, "resnet18", 200),
            make(Stain::MelanA, Magnification::X20, "resnet18", 200),
            make(Stain::MelanA, Magnification::X10, "resnet18", 200),
            make(Stain::MelanA, Magnification::X5, "resnet18", 200),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionSettings {
    /// Mode used for the report table; every mode is still computed.
    pub mode: FusionMode,
    pub layout: MultiStainLayout,
}

impl Default for FusionSettings {
    fn default() -> Self {
        FusionSettings {
            mode: FusionMode::ThresholdDistance,
            layout: MultiStainLayout::Flat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapSettings {
    /// Resampling tiles for the slide-score CI.
    pub slide_n_boot: usize,
    /// Resampling slides for the cohort AUROC CI.
    pub cohort_n_boot: usize,
    pub alpha: f64,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        BootstrapSettings {
            slide_n_boot: 10_000,
            cohort_n_boot: 10_000,
            alpha: 0.05,
        }
    }
}

/// Everything a run needs. Relative paths resolve against the config file's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub data_root: PathBuf,
    pub out_root: PathBuf,
    pub seed: u64,
    pub synth: SynthConfig,
    /// Cohort ids, i.e. manifest names under `data_root/manifests`.
    pub cohorts: Vec<String>,
    /// Cohort whose train split trains the scorers and whose out-of-fold
    /// predictions set the decision thresholds; its holdout split is
    /// evaluated.
    pub training_cohort: String,
    pub validation_folds: usize,
    pub in_situ_policy: InSituPolicy,
    pub tessellation: TessellationParams,
    pub scorers: Vec<ScorerConfig>,
    /// Jitter applied to extra views of every training tile.
    pub jitter: JitterParams,
    pub jitter_views: usize,
    pub fusion: FusionSettings,
    pub bootstrap: BootstrapSettings,
    /// Tile-score CSV replacing feature extraction and training.
    pub external_scores: Option<PathBuf>,
    /// Also write every tile as a PNG under `tiles/`.
    pub write_tile_images: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data_root: PathBuf::from("data"),
            out_root: PathBuf::from("out"),
            seed: 20240801,
            synth: SynthConfig::default(),
            cohorts: vec!["A".into(), "B".into(), "C".into()],
            training_cohort: "A".into(),
            validation_folds: 5,
            in_situ_policy: InSituPolicy::AsMelanoma,
            tessellation: TessellationParams::default(),
            scorers: ScorerConfig::defaults(),
            jitter: JitterParams::default(),
            jitter_views: 1,
            fusion: FusionSettings::default(),
            bootstrap: BootstrapSettings::default(),
            external_scores: None,
            write_tile_images: false,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: PipelineConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_root);
        fix(&mut self.out_root);
        if let Some(p) = self.external_scores.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.cohorts.is_empty() {
            return bad("no cohorts configured".into());
        }
        if !self.cohorts.contains(&self.training_cohort) {
            return bad(format!(
                "training_cohort {:?} is not among the cohorts",
                self.training_cohort
            ));
        }
        if self.validation_folds < 2 {
            return bad("validation_folds must be >= 2".into());
        }
        if self.scorers.is_empty() {
            return bad("no scorers configured".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for s in &self.scorers {
            if !ids.insert(s.model_id()) {
                return bad(format!("scorer {} listed twice", s.model_id()));
            }
            if s.sampling_number == 0 {
                return bad(format!("scorer {}: sampling_number must be >= 1", s.model_id()));
            }
            if s.batch_size == Some(0) {
                return bad(format!("scorer {}: batch_size must be >= 1", s.model_id()));
            }
        }
        if !self.scorers.iter().any(|s| s.stain == Stain::HE) {
            return bad("an H&E scorer is required".into());
        }
        if !self.scorers.iter().any(|s| s.stain == Stain::MelanA) {
            return bad("at least one MelanA scorer is required".into());
        }
        self.jitter.validate()?;
        self.slide_bootstrap(0).validate()?;
        self.cohort_bootstrap().validate()?;
        self.synth.validate()
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn digest(&self) -> Result<String> {
        let json = serde_json::to_vec(self)?;
        Ok(Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn slide_bootstrap(&self, seed: u64) -> BootstrapConfig {
        BootstrapConfig {
            n_boot: self.bootstrap.slide_n_boot,
            alpha: self.bootstrap.alpha,
            seed,
        }
    }

    pub fn cohort_bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            n_boot: self.bootstrap.cohort_n_boot,
            alpha: self.bootstrap.alpha,
            seed: crate::rng::substream(self.seed, "cohort-bootstrap"),
        }
    }

    pub fn scorers_for(&self, stain: Stain) -> impl Iterator<Item = &ScorerConfig> {
        self.scorers.iter().filter(move |s| s.stain == stain)
    }
}
