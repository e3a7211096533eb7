//! Slide rendering: textured background, a lesion made of blobs, nuclei
//! dots and (for MelanA) red chromogen foci, then the site color transform.

use std::f64::consts::TAU;

use image::{Rgb, RgbImage};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{SiteProfile, SynthConfig};
use crate::color::{hsv_to_rgb, rgb_to_hsv};
use crate::error::Result;
use crate::labels::Diagnosis;
use crate::rng::{hash_unit, stream_rng, StreamRng};
use crate::tiling::{AnnotationMask, Bitmap, Magnification, Polygon, SlideImage, Stain};

const POLYGON_VERTICES: usize = 48;
const NOISE_CELL_PX: u32 = 64;

/// Strength of the class signal carried by each stain of one slide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SignalSplit {
    pub he: f64,
    pub melana: f64,
}

fn malignancy(diagnosis: Diagnosis) -> f64 {
    match diagnosis {
        Diagnosis::Melanoma => 1.0,
        Diagnosis::InSitu => 0.6,
        Diagnosis::Nevus => 0.0,
    }
}

fn normal(rng: &mut StreamRng) -> f64 {
    rng.sample(StandardNormal)
}

/// Stream 0 of the slide seed holds everything both stains share.
fn shared_draws(diagnosis: Diagnosis, config: &SynthConfig, slide_id: &str, seed: u64) -> Result<(AnnotationMask, SignalSplit)> {
    let mut rng = stream_rng(seed, 0);
    let m = config.effect_size * malignancy(diagnosis);
    let u: f64 = rng.random();
    let split = if config.complementary_signal {
        let k = config.complementarity;
        SignalSplit {
            he: m * (1.0 - k * u),
            melana: m * (1.0 - k * (1.0 - u)),
        }
    } else {
        SignalSplit { he: m, melana: m }
    };

    let s = config.image_size as f64;
    let mut polygons = Vec::new();
    // central blob large enough to dominate the single 5x tile
    let cx = s * (0.5 + 0.02 * (rng.random::<f64>() - 0.5));
    let cy = s * (0.5 + 0.02 * (rng.random::<f64>() - 0.5));
    let r0 = s * rng.random_range(0.46..0.49);
    polygons.push(blob(&mut rng, cx, cy, r0, 0.03, s));
    let (lo, hi) = config.satellite_blobs;
    let n_satellites = rng.random_range(lo..=hi.max(lo));
    for _ in 0..n_satellites {
        let x = s * rng.random_range(0.1..0.9);
        let y = s * rng.random_range(0.1..0.9);
        // melanoma lesions vary more in size
        let spread = 1.0 + 0.8 * m * normal(&mut rng).abs();
        let r = s * rng.random_range(config.satellite_radius.0..config.satellite_radius.1) * spread;
        polygons.push(blob(&mut rng, x, y, r, 0.12, s));
    }
    Ok((AnnotationMask::new(slide_id, polygons)?, split))
}

/// Irregular closed polygon around `(cx, cy)`, clipped to the image.
fn blob(rng: &mut StreamRng, cx: f64, cy: f64, r: f64, wobble: f64, size: f64) -> Polygon {
    let harmonics: Vec<(f64, f64)> = (2..5)
        .map(|_| (wobble * rng.random::<f64>(), TAU * rng.random::<f64>()))
        .collect();
    (0..POLYGON_VERTICES)
        .map(|i| {
            let theta = TAU * i as f64 / POLYGON_VERTICES as f64;
            let radial: f64 = 1.0
                + harmonics
                    .iter()
                    .enumerate()
                    .map(|(k, &(a, phase))| a * ((k as f64 + 2.0) * theta + phase).cos())
                    .sum::<f64>();
            let x = (cx + r * radial * theta.cos()).clamp(0.0, size);
            let y = (cy + r * radial * theta.sin()).clamp(0.0, size);
            [x, y]
        })
        .collect()
}

/// Smooth value noise in `[0, 1]` on a coarse lattice.
struct ValueNoise {
    nodes: Vec<f64>,
    cols: usize,
}

impl ValueNoise {
    fn new(rng: &mut StreamRng, size: u32) -> Self {
        let cols = (size / NOISE_CELL_PX + 2) as usize;
        ValueNoise {
            nodes: (0..cols * cols).map(|_| rng.random()).collect(),
            cols,
        }
    }

    fn at(&self, x: u32, y: u32) -> f64 {
        let fx = x as f64 / NOISE_CELL_PX as f64;
        let fy = y as f64 / NOISE_CELL_PX as f64;
        let (ix, iy) = (fx as usize, fy as usize);
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (tx, ty) = (smooth(fx - ix as f64), smooth(fy - iy as f64));
        let n = |i: usize, j: usize| self.nodes[j * self.cols + i];
        let top = n(ix, iy) * (1.0 - tx) + n(ix + 1, iy) * tx;
        let bottom = n(ix, iy + 1) * (1.0 - tx) + n(ix + 1, iy + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

struct Palette {
    background: ([f64; 3], [f64; 3]),
    lesion: ([f64; 3], [f64; 3]),
}

fn palette(stain: Stain) -> Palette {
    match stain {
        Stain::HE => Palette {
            background: ([238.0, 176.0, 208.0], [218.0, 142.0, 188.0]),
            lesion: ([206.0, 146.0, 204.0], [178.0, 116.0, 192.0]),
        },
        Stain::MelanA => Palette {
            background: ([236.0, 234.0, 240.0], [222.0, 220.0, 232.0]),
            lesion: ([226.0, 222.0, 234.0], [210.0, 206.0, 226.0]),
        },
    }
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

/// Blends a soft-edged disk into the image, only where `region` is set.
fn stamp(img: &mut RgbImage, region: &Bitmap, cx: f64, cy: f64, r: f64, color: [f64; 3], alpha: f64) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let x0 = ((cx - r - 1.0).floor() as i64).max(0);
    let x1 = ((cx + r + 1.0).ceil() as i64).min(w - 1);
    let y0 = ((cy - r - 1.0).floor() as i64).max(0);
    let y1 = ((cy + r + 1.0).ceil() as i64).min(h - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d = ((x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2)).sqrt();
            let a = alpha * (r + 0.5 - d).clamp(0.0, 1.0);
            if a <= 0.0 || !region.get(x as u32, y as u32) {
                continue;
            }
            let p = img.get_pixel_mut(x as u32, y as u32);
            for c in 0..3 {
                p.0[c] = (p.0[c] as f64 * (1.0 - a) + color[c] * a).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
}

/// Scatters `count` disks whose centers fall inside `region`.
#[allow(clippy::too_many_arguments)]
fn scatter(
    img: &mut RgbImage,
    rng: &mut StreamRng,
    region: &Bitmap,
    count: usize,
    radius: (f64, f64),
    color: [f64; 3],
    alpha: f64,
) {
    let (w, h) = (region.width, region.height);
    let mut placed = 0;
    let mut attempts = 0usize;
    while placed < count && attempts < count * 50 + 100 {
        attempts += 1;
        let x = rng.random_range(0.0..w as f64);
        let y = rng.random_range(0.0..h as f64);
        let r = rng.random_range(radius.0..radius.1);
        if !region.get(x as u32, y as u32) {
            continue;
        }
        stamp(img, region, x, y, r, color, alpha);
        placed += 1;
    }
}

/// Renders one stain of one slide. Both stains of a slide share the
/// annotation and the split of the class signal.
pub fn generate_slide(
    diagnosis: Diagnosis,
    site: &SiteProfile,
    stain: Stain,
    config: &SynthConfig,
    slide_id: &str,
    seed: u64,
) -> Result<(SlideImage, AnnotationMask)> {
    config.validate()?;
    let (mask, split) = shared_draws(diagnosis, config, slide_id, seed)?;
    let size = config.image_size;
    let lesion = mask.rasterize(size, size, 1.0);
    let mut background = Bitmap::new(size, size);
    for (b, &l) in background.bits.iter_mut().zip(&lesion.bits) {
        *b = !l;
    }
    let stain_index = match stain {
        Stain::HE => 1,
        Stain::MelanA => 2,
    };
    let mut rng = stream_rng(seed, stain_index);
    let texture_seed: u64 = rng.random();
    let noise = ValueNoise::new(&mut rng, size);
    let pal = palette(stain);
    let mut img = RgbImage::from_fn(size, size, |x, y| {
        let t = (noise.at(x, y) + 0.25 * (hash_unit(texture_seed, x as u64, y as u64) - 0.5)).clamp(0.0, 1.0);
        let (a, b) = if lesion.get(x, y) { pal.lesion } else { pal.background };
        let c = lerp3(a, b, t);
        Rgb([c[0] as u8, c[1] as u8, c[2] as u8])
    });

    let v = site.variability;
    let biology = (config.slide_variability * normal(&mut rng)).exp();
    let lesion_px = lesion.count() as f64;
    let background_px = (size as f64).powi(2) - lesion_px;
    let d = &config.density;
    match stain {
        Stain::HE => {
            let g = split.he;
            scatter(&mut img, &mut rng, &background, (d.stroma_nuclei * background_px) as usize, (2.0, 3.5), [110.0, 60.0, 140.0], 0.85);
            let n = d.lesion_nuclei * biology * (1.0 + d.nuclei_gain * g) * lesion_px;
            let darkness = 1.0 - 0.3 * g;
            let color = [80.0 * darkness, 40.0 * darkness, 110.0 * darkness];
            scatter(&mut img, &mut rng, &lesion, n as usize, (2.5, 4.5), color, 0.9);
        }
        Stain::MelanA => {
            let g = split.melana;
            scatter(&mut img, &mut rng, &lesion, (d.counterstain_nuclei * lesion_px) as usize, (2.0, 3.5), [140.0, 140.0, 190.0], 0.6);
            scatter(&mut img, &mut rng, &background, (d.counterstain_nuclei * 0.5 * background_px) as usize, (2.0, 3.5), [150.0, 150.0, 195.0], 0.5);
            let n = d.chromogen_foci * biology * (1.0 + d.foci_gain * g) * lesion_px;
            let dilution = (v * normal(&mut rng)).exp();
            let alpha = (0.8 * site.chromogen_intensity * dilution).min(1.0);
            scatter(&mut img, &mut rng, &lesion, n as usize, (4.0, 8.0), [185.0, 40.0, 50.0], alpha);
        }
    }

    // site staining profile plus per-slide staining variation
    let t = match stain {
        Stain::HE => &site.he,
        Stain::MelanA => &site.melana,
    };
    let hue = t.hue_shift_deg + 25.0 * v * normal(&mut rng);
    let sat = t.saturation_scale * (v * normal(&mut rng)).exp();
    let val = t.brightness_scale * (0.5 * v * normal(&mut rng)).exp();
    if hue != 0.0 || sat != 1.0 || val != 1.0 {
        for p in img.pixels_mut() {
            let [r, g, b] = p.0.map(|c| c as f32 / 255.0);
            let (h, s, vv) = rgb_to_hsv(r, g, b);
            let (r, g, b) = hsv_to_rgb(
                (h + hue as f32).rem_euclid(360.0),
                (s * sat as f32).min(1.0),
                (vv * val as f32).min(1.0),
            );
            p.0 = [r, g, b].map(|c| (c * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok((SlideImage::new(slide_id, stain, Magnification::X40, img)?, mask))
}
