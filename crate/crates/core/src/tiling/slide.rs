use std::path::Path;

use image::{ImageBuffer, Rgb, RgbImage};

use super::{Magnification, Stain, TileRef};
use crate::error::{Error, Result};

/// An RGB slide (or slide level) at a declared magnification.
#[derive(Debug, Clone, PartialEq)]
pub struct SlideImage {
    pub slide_id: String,
    pub stain: Stain,
    pub magnification: Magnification,
    pub pixels: RgbImage,
}

impl SlideImage {
    pub fn new(
        slide_id: impl Into<String>,
        stain: Stain,
        magnification: Magnification,
        pixels: RgbImage,
    ) -> Result<Self> {
        if pixels.width() == 0 || pixels.height() == 0 {
            return Err(Error::InvalidInput("slide image must be at least 1x1".into()));
        }
        Ok(SlideImage {
            slide_id: slide_id.into(),
            stain,
            magnification,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }

    pub fn um_per_px(&self) -> f64 {
        self.magnification.um_per_px()
    }

    pub fn load_png(
        path: &Path,
        slide_id: impl Into<String>,
        stain: Stain,
        magnification: Magnification,
    ) -> Result<Self> {
        let pixels = image::open(path)?.into_rgb8();
        Self::new(slide_id, stain, magnification, pixels)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        save_rgb_png(&self.pixels, path)
    }

    /// Copies out the pixels of one tile.
    pub fn crop(&self, tile: &TileRef) -> RgbImage {
        image::imageops::crop_imm(
            &self.pixels,
            tile.origin_x,
            tile.origin_y,
            tile.edge_px,
            tile.edge_px,
        )
        .to_image()
    }
}

/// PNG with fast compression; slide-sized images dominate I/O time.
pub(crate) fn save_rgb_png(img: &RgbImage, path: &Path) -> Result<()> {
    use image::codecs::png::{CompressionType, FilterType, PngEncoder};
    use image::ImageEncoder;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let encoder = PngEncoder::new_with_quality(
        std::io::BufWriter::new(file),
        CompressionType::Fast,
        FilterType::Sub,
    );
    encoder.write_image(
        img.as_raw(),
        img.width(),
        img.height(),
        image::ExtendedColorType::Rgb8,
    )?;
    Ok(())
}

/// Box-filter downsampling to a coarser magnification.
///
/// The resolution ratio must be an integer power of two. Each output pixel is
/// the mean of a `ratio x ratio` block, rounded half up; trailing rows and
/// columns that do not fill a block are dropped.
pub fn downscale(image: &SlideImage, target: Magnification) -> Result<SlideImage> {
    let from = image.um_per_px();
    let to = target.um_per_px();
    let ratio = to / from;
    if ratio < 1.0 || ratio.fract() != 0.0 || !(ratio as u32).is_power_of_two() {
        return Err(Error::InvalidResampling { from, to });
    }
    let r = ratio as u32;
    if r == 1 {
        return Ok(image.clone());
    }
    let (w, h) = (image.width() / r, image.height() / r);
    if w == 0 || h == 0 {
        return Err(Error::InvalidInput(format!(
            "slide {} ({}x{}) is too small to downscale by {r}",
            image.slide_id,
            image.width(),
            image.height()
        )));
    }
    let n = r * r;
    let src = &image.pixels;
    let out: RgbImage = ImageBuffer::from_fn(w, h, |x, y| {
        let mut acc = [0u32; 3];
        for dy in 0..r {
            for dx in 0..r {
                let p = src.get_pixel(x * r + dx, y * r + dy).0;
                acc[0] += u32::from(p[0]);
                acc[1] += u32::from(p[1]);
                acc[2] += u32::from(p[2]);
            }
        }
        Rgb(acc.map(|s| ((s + n / 2) / n) as u8))
    });
    SlideImage::new(image.slide_id.clone(), image.stain, target, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slide(w: u32, h: u32, f: impl Fn(u32, u32) -> [u8; 3]) -> SlideImage {
        let px = ImageBuffer::from_fn(w, h, |x, y| Rgb(f(x, y)));
        SlideImage::new("s", Stain::HE, Magnification::X40, px).unwrap()
    }

    #[test]
    fn halves_dimensions() {
        let img = slide(1024, 1024, |_, _| [1, 2, 3]);
        let out = downscale(&img, Magnification::X20).unwrap();
        assert_eq!((out.width(), out.height()), (512, 512));
        assert_eq!(out.um_per_px(), 0.5);
    }

    #[test]
    fn odd_dimensions_floor() {
        let img = slide(1001, 999, |_, _| [0, 0, 0]);
        let out = downscale(&img, Magnification::X10).unwrap();
        assert_eq!((out.width(), out.height()), (250, 249));
    }

    #[test]
    fn constant_color_is_fixed_point() {
        let img = slide(64, 64, |_, _| [200, 17, 99]);
        for m in [Magnification::X20, Magnification::X10, Magnification::X5] {
            let out = downscale(&img, m).unwrap();
            assert!(out.pixels.pixels().all(|p| p.0 == [200, 17, 99]));
        }
    }

    #[test]
    fn block_average_rounds_half_up() {
        // [0, 0; 255, 255] -> 510 / 4 = 127.5 -> 128
        let img = slide(2, 2, |_, y| if y == 0 { [0; 3] } else { [255; 3] });
        let out = downscale(&img, Magnification::X20).unwrap();
        assert_eq!(out.pixels.get_pixel(0, 0).0, [128, 128, 128]);
    }

    #[test]
    fn upscaling_is_rejected() {
        let img = slide(8, 8, |_, _| [0; 3]);
        let coarse = downscale(&img, Magnification::X10).unwrap();
        assert!(matches!(
            downscale(&coarse, Magnification::X40),
            Err(Error::InvalidResampling { .. })
        ));
    }
}
