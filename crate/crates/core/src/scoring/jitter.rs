use image::RgbImage;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::color::{hsv_to_rgb, luma, rgb_to_hsv};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Maximum perturbation magnitudes. Factors are drawn from `[1 - m, 1 + m]`,
/// the hue shift from `[-hue, hue]` as a fraction of the hue circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterParams {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
}

impl Default for JitterParams {
    fn default() -> Self {
        JitterParams {
            brightness: 0.2,
            contrast: 0.2,
            saturation: 0.2,
            hue: 0.05,
        }
    }
}

impl JitterParams {
    pub const NONE: JitterParams = JitterParams {
        brightness: 0.0,
        contrast: 0.0,
        saturation: 0.0,
        hue: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(unit(self.brightness) && unit(self.contrast) && unit(self.saturation) && unit(self.hue))
            || self.hue > 0.5
        {
            return Err(Error::InvalidInput(format!(
                "jitter magnitudes must lie in [0, 1] with hue <= 0.5: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Concrete perturbation applied to one image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterFactors {
    pub brightness: f32,
    pub contrast: f32,
    pub saturation: f32,
    /// Fraction of the full hue circle.
    pub hue_shift: f32,
}

impl JitterFactors {
    pub const IDENTITY: JitterFactors = JitterFactors {
        brightness: 1.0,
        contrast: 1.0,
        saturation: 1.0,
        hue_shift: 0.0,
    };

    /// Draws brightness, contrast, saturation then hue, always four draws.
    pub fn draw<R: Rng + ?Sized>(params: &JitterParams, rng: &mut R) -> Self {
        let mut factor = |m: f64| {
            let u: f64 = rng.random();
            (1.0 - m + 2.0 * m * u) as f32
        };
        let brightness = factor(params.brightness);
        let contrast = factor(params.contrast);
        let saturation = factor(params.saturation);
        let u: f64 = rng.random();
        let hue_shift = ((2.0 * u - 1.0) * params.hue) as f32;
        JitterFactors {
            brightness,
            contrast,
            saturation,
            hue_shift,
        }
    }
}

/// Random color jitter, deterministic in `seed`.
pub fn color_jitter(tile: &RgbImage, params: &JitterParams, seed: u64) -> Result<RgbImage> {
    params.validate()?;
    let factors = JitterFactors::draw(params, &mut stream_rng(seed, 0));
    Ok(apply_jitter(tile, &factors))
}

/// Applies brightness, contrast, saturation and hue in that order, clamping
/// to the 8-bit range after every step.
pub fn apply_jitter(tile: &RgbImage, f: &JitterFactors) -> RgbImage {
    let clamp = |x: f32| x.clamp(0.0, 255.0);
    let mut px: Vec<[f32; 3]> = tile
        .pixels()
        .map(|p| p.0.map(|c| clamp(f32::from(c) * f.brightness)))
        .collect();

    if f.contrast != 1.0 {
        let mean = px.iter().map(|p| f64::from(luma(p[0], p[1], p[2]))).sum::<f64>()
            / px.len().max(1) as f64;
        let offset = (1.0 - f.contrast) * mean as f32;
        px.iter_mut()
            .for_each(|p| *p = p.map(|c| clamp(f.contrast * c + offset)));
    }
    if f.saturation != 1.0 {
        px.iter_mut().for_each(|p| {
            let gray = (1.0 - f.saturation) * luma(p[0], p[1], p[2]);
            *p = p.map(|c| clamp(f.saturation * c + gray));
        });
    }
    if f.hue_shift != 0.0 {
        let shift = f.hue_shift * 360.0;
        px.iter_mut().for_each(|p| {
            let (h, s, v) = rgb_to_hsv(p[0] / 255.0, p[1] / 255.0, p[2] / 255.0);
            let (r, g, b) = hsv_to_rgb(h + shift, s, v);
            *p = [r, g, b].map(|c| clamp(c * 255.0));
        });
    }

    let raw: Vec<u8> = px.iter().flat_map(|p| p.map(|c| c.round() as u8)).collect();
    RgbImage::from_raw(tile.width(), tile.height(), raw).expect("buffer matches dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{ImageBuffer, Rgb};

    fn sample() -> RgbImage {
        ImageBuffer::from_fn(37, 23, |x, y| {
            Rgb([(x * 7) as u8, (y * 11) as u8, ((x * y) % 256) as u8])
        })
    }

    #[test]
    fn zero_params_are_identity() {
        let img = sample();
        assert_eq!(color_jitter(&img, &JitterParams::NONE, 42).unwrap(), img);
    }

    #[test]
    fn brightness_doubling_clamps() {
        let gray: RgbImage = ImageBuffer::from_pixel(4, 4, Rgb([128, 128, 128]));
        let f = JitterFactors {
            brightness: 2.0,
            ..JitterFactors::IDENTITY
        };
        let out = apply_jitter(&gray, &f);
        assert!(out.pixels().all(|p| p.0 == [255, 255, 255]));
    }

    #[test]
    fn deterministic_in_seed() {
        let img = sample();
        let p = JitterParams::default();
        assert_eq!(color_jitter(&img, &p, 7).unwrap(), color_jitter(&img, &p, 7).unwrap());
        assert_ne!(color_jitter(&img, &p, 7).unwrap(), color_jitter(&img, &p, 8).unwrap());
    }

    #[test]
    fn draws_stay_in_range() {
        let p = JitterParams {
            brightness: 0.3,
            contrast: 0.1,
            saturation: 0.5,
            hue: 0.05,
        };
        let mut rng = stream_rng(3, 0);
        for _ in 0..1000 {
            let f = JitterFactors::draw(&p, &mut rng);
            assert!((0.7..=1.3).contains(&f.brightness));
            assert!((0.9..=1.1).contains(&f.contrast));
            assert!((0.5..=1.5).contains(&f.saturation));
            assert!((-0.05..=0.05).contains(&f.hue_shift));
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let p = JitterParams {
            hue: 0.6,
            ..JitterParams::NONE
        };
        assert!(color_jitter(&sample(), &p, 0).is_err());
        let p = JitterParams {
            brightness: -0.1,
            ..JitterParams::NONE
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn zero_saturation_gives_gray() {
        let f = JitterFactors {
            saturation: 0.0,
            ..JitterFactors::IDENTITY
        };
        let out = apply_jitter(&sample(), &f);
        assert!(out
            .pixels()
            .all(|p| p.0[0].abs_diff(p.0[1]) <= 1 && p.0[1].abs_diff(p.0[2]) <= 1));
    }
}
