//! Synthetic multi-site cohorts: paired H&E and MelanA slide images with
//! lesion annotations, a tunable class signal and per-site staining shifts.

mod render;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::Diagnosis;
use crate::rng::{stream_rng, substream};
use crate::tiling::{Stain, BASE_UM_PER_PX, TILE_EDGE_PX};

pub use render::generate_slide;

/// Color change applied to every pixel of one stain at one site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StainTransform {
    pub hue_shift_deg: f64,
    pub saturation_scale: f64,
    pub brightness_scale: f64,
}

impl StainTransform {
    pub const IDENTITY: StainTransform = StainTransform {
        hue_shift_deg: 0.0,
        saturation_scale: 1.0,
        brightness_scale: 1.0,
    };

    pub fn uniform(hue_shift_deg: f64, saturation_scale: f64, brightness_scale: f64) -> Self {
        StainTransform {
            hue_shift_deg,
            saturation_scale,
            brightness_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteProfile {
    pub site_id: String,
    pub he: StainTransform,
    pub melana: StainTransform,
    /// Multiplies the opacity of the MelanA chromogen.
    pub chromogen_intensity: f64,
    /// Spread of per-slide staining variation (log-scale sd).
    pub variability: f64,
    /// Overrides `SynthConfig::slides_per_class` for this site.
    #[serde(default)]
    pub slides_per_class: Option<usize>,
}

impl SiteProfile {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("HE", &self.he), ("MelanA", &self.melana)] {
            if !(t.saturation_scale > 0.0 && t.brightness_scale > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "site {}: {name} scales must be positive",
                    self.site_id
                )));
            }
            if !(-180.0..=180.0).contains(&t.hue_shift_deg) {
                return Err(Error::InvalidInput(format!(
                    "site {}: {name} hue shift must lie in [-180, 180]",
                    self.site_id
                )));
            }
        }
        if !(self.chromogen_intensity > 0.0) || !(self.variability >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "site {}: chromogen_intensity must be > 0 and variability >= 0",
                self.site_id
            )));
        }
        if self.site_id.is_empty() || self.site_id.contains(['/', '\\', ',']) {
            return Err(Error::InvalidInput(format!("invalid site id {:?}", self.site_id)));
        }
        Ok(())
    }

    /// Three sites: the training site and two external sites with shifted
    /// hue, saturation, brightness and chromogen dilution.
    pub fn defaults() -> Vec<SiteProfile> {
        vec![
            SiteProfile {
                site_id: "A".into(),
                he: StainTransform::IDENTITY,
                melana: StainTransform::IDENTITY,
                chromogen_intensity: 1.0,
                variability: 0.02,
                slides_per_class: None,
            },
            SiteProfile {
                site_id: "B".into(),
                he: StainTransform::uniform(20.0, 0.9, 1.05),
                melana: StainTransform::uniform(20.0, 0.9, 1.05),
                chromogen_intensity: 0.6,
                variability: 0.35,
                slides_per_class: None,
            },
            SiteProfile {
                site_id: "C".into(),
                he: StainTransform::uniform(-15.0, 1.15, 0.95),
                melana: StainTransform::uniform(-15.0, 1.15, 0.95),
                chromogen_intensity: 1.4,
                variability: 0.45,
                slides_per_class: None,
            },
        ]
    }
}

/// Dot densities per base pixel and how strongly they respond to the class
/// signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityParams {
    pub lesion_nuclei: f64,
    pub stroma_nuclei: f64,
    pub nuclei_gain: f64,
    pub counterstain_nuclei: f64,
    pub chromogen_foci: f64,
    pub foci_gain: f64,
}

impl Default for DensityParams {
    fn default() -> Self {
        DensityParams {
            lesion_nuclei: 1.0 / 500.0,
            stroma_nuclei: 1.0 / 2000.0,
            nuclei_gain: 1.0,
            counterstain_nuclei: 1.0 / 900.0,
            chromogen_foci: 1.0 / 2500.0,
            foci_gain: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub sites: Vec<SiteProfile>,
    pub slides_per_class: usize,
    /// Edge of the square 40x image in pixels.
    pub image_size: u32,
    pub base_um_per_px: f64,
    /// 0 gives label-independent images, 1 the strongest signal.
    pub effect_size: f64,
    /// Share of the melanoma class rendered as in-situ (weaker signal).
    pub in_situ_fraction: f64,
    /// Share of the first site's slides, per class, used for training.
    pub train_fraction: f64,
    /// Route part of the signal only into H&E and part only into MelanA.
    pub complementary_signal: bool,
    pub complementarity: f64,
    /// Log-scale sd of per-slide dot density, independent per stain.
    pub slide_variability: f64,
    pub satellite_blobs: (u32, u32),
    /// Satellite blob radius as a fraction of the image edge.
    pub satellite_radius: (f64, f64),
    pub density: DensityParams,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sites: SiteProfile::defaults(),
            slides_per_class: 20,
            image_size: 8 * TILE_EDGE_PX,
            base_um_per_px: BASE_UM_PER_PX,
            effect_size: 0.8,
            in_situ_fraction: 0.1,
            train_fraction: 0.6,
            complementary_signal: true,
            complementarity: 0.6,
            slide_variability: 0.15,
            satellite_blobs: (1, 3),
            satellite_radius: (0.06, 0.12),
            density: DensityParams::default(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.image_size < 2 * TILE_EDGE_PX {
            return bad(format!("image_size must be at least {} px", 2 * TILE_EDGE_PX));
        }
        if self.base_um_per_px != BASE_UM_PER_PX {
            return bad(format!("base_um_per_px must be {BASE_UM_PER_PX}"));
        }
        for (name, x) in [
            ("effect_size", self.effect_size),
            ("in_situ_fraction", self.in_situ_fraction),
            ("train_fraction", self.train_fraction),
            ("complementarity", self.complementarity),
        ] {
            if !(0.0..=1.0).contains(&x) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.slide_variability >= 0.0) {
            return bad("slide_variability must be >= 0".into());
        }
        let (r0, r1) = self.satellite_radius;
        if !(r0 > 0.0 && r0 < r1 && r1 < 0.5) {
            return bad("satellite_radius must satisfy 0 < min < max < 0.5".into());
        }
        if self.satellite_blobs.0 > self.satellite_blobs.1 {
            return bad("satellite_blobs min exceeds max".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for site in &self.sites {
            site.validate()?;
            if !ids.insert(&site.site_id) {
                return bad(format!("duplicate site id {}", site.site_id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Holdout,
    Test,
}

/// Image paths per stain, relative to the data root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StainPaths {
    #[serde(rename = "HE")]
    pub he: PathBuf,
    #[serde(rename = "MelanA")]
    pub melana: PathBuf,
}

impl StainPaths {
    pub fn get(&self, stain: Stain) -> &Path {
        match stain {
            Stain::HE => &self.he,
            Stain::MelanA => &self.melana,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub slide_id: String,
    pub site: String,
    pub label: Diagnosis,
    pub split: Split,
    pub stains: StainPaths,
    pub annotation: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortManifest {
    pub cohort_id: String,
    pub entries: Vec<ManifestEntry>,
}

impl CohortManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Manifest path of a cohort under a data root.
    pub fn path_in(root: &Path, cohort_id: &str) -> PathBuf {
        root.join("manifests").join(format!("{cohort_id}.json"))
    }
}

/// Slide list of one site: labels, splits and seeds, without pixels.
fn plan_site(config: &SynthConfig, site_index: usize, site: &SiteProfile) -> Vec<(ManifestEntry, u64)> {
    let n = site.slides_per_class.unwrap_or(config.slides_per_class);
    let root = substream(config.seed, "synthesis");
    let site_seed = substream(root, &site.site_id);
    let n_in_situ = (config.in_situ_fraction * n as f64).round() as usize;
    let mut labels: Vec<Diagnosis> = (0..n)
        .map(|i| if i < n_in_situ { Diagnosis::InSitu } else { Diagnosis::Melanoma })
        .chain(std::iter::repeat_n(Diagnosis::Nevus, n))
        .collect();
    labels.shuffle(&mut stream_rng(site_seed, 0));

    // stratified split: the first share of each class, in slide order
    let n_train = (config.train_fraction * n as f64).round() as usize;
    let mut seen = [0usize; 2];
    labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let slide_id = format!("{}-{:04}", site.site_id, i + 1);
            let class = usize::from(label == Diagnosis::Nevus);
            let split = if site_index > 0 {
                Split::Test
            } else if seen[class] < n_train {
                Split::Train
            } else {
                Split::Holdout
            };
            seen[class] += 1;
            let entry = ManifestEntry {
                stains: StainPaths {
                    he: PathBuf::from(format!("images/{slide_id}_HE.png")),
                    melana: PathBuf::from(format!("images/{slide_id}_MelanA.png")),
                },
                annotation: PathBuf::from(format!("annotations/{slide_id}.json")),
                site: site.site_id.clone(),
                label,
                split,
                slide_id,
            };
            let seed = substream(site_seed, &entry.slide_id);
            (entry, seed)
        })
        .collect()
}

/// Generates every site's slides under `root` and writes one manifest per
/// site to `root/manifests/<site>.json`.
pub fn generate_cohorts(config: &SynthConfig, root: &Path) -> Result<Vec<CohortManifest>> {
    config.validate()?;
    for dir in ["images", "annotations", "manifests"] {
        let d = root.join(dir);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let plans: Vec<(usize, ManifestEntry, u64)> = config
        .sites
        .iter()
        .enumerate()
        .flat_map(|(i, site)| plan_site(config, i, site).into_iter().map(move |(e, s)| (i, e, s)))
        .collect();
    plans
        .par_iter()
        .map(|(site_index, entry, seed)| {
            let site = &config.sites[*site_index];
            for stain in Stain::ALL {
                let (image, mask) = generate_slide(entry.label, site, stain, config, &entry.slide_id, *seed)?;
                image.save_png(&root.join(entry.stains.get(stain)))?;
                if stain == Stain::HE {
                    mask.save(&root.join(&entry.annotation))?;
                }
            }
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;

    let mut by_site: BTreeMap<usize, Vec<ManifestEntry>> = BTreeMap::new();
    for (i, entry, _) in plans {
        by_site.entry(i).or_default().push(entry);
    }
    let manifests: Vec<CohortManifest> = config
        .sites
        .iter()
        .enumerate()
        .map(|(i, site)| CohortManifest {
            cohort_id: site.site_id.clone(),
            entries: by_site.remove(&i).unwrap_or_default(),
        })
        .collect();
    for m in &manifests {
        m.save(&CohortManifest::path_in(root, &m.cohort_id))?;
    }
    Ok(manifests)
}
