use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::color::rgb_to_hsv;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tiling::TILE_EDGE_PX;

pub const HIST_BINS: usize = 8;

/// 3 x 8 HSV histogram bins followed by mean and std of R, G, B.
pub const FEATURE_DIM: usize = 3 * HIST_BINS + 6;

/// Offsets into a [`FeatureVector`].
pub mod layout {
    use super::HIST_BINS;
    pub const HUE: usize = 0;
    pub const SATURATION: usize = HIST_BINS;
    pub const VALUE: usize = 2 * HIST_BINS;
    pub const RGB_MEAN: usize = 3 * HIST_BINS;
    pub const RGB_STD: usize = 3 * HIST_BINS + 3;
}

/// Handcrafted color descriptor of one tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        FeatureVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn hue_hist(&self) -> &[T] {
        &self.values[layout::HUE..layout::HUE + HIST_BINS]
    }

    pub fn saturation_hist(&self) -> &[T] {
        &self.values[layout::SATURATION..layout::SATURATION + HIST_BINS]
    }

    pub fn value_hist(&self) -> &[T] {
        &self.values[layout::VALUE..layout::VALUE + HIST_BINS]
    }

    pub fn rgb_mean(&self) -> &[T] {
        &self.values[layout::RGB_MEAN..layout::RGB_MEAN + 3]
    }

    pub fn rgb_std(&self) -> &[T] {
        &self.values[layout::RGB_STD..layout::RGB_STD + 3]
    }
}

#[inline]
fn unit_bin(numerator: u32, denominator: u32) -> usize {
    // floor(8 * n / d), with n == d landing in the top bin
    ((HIST_BINS as u32 * numerator) / denominator).min(HIST_BINS as u32 - 1) as usize
}

/// Computes the 30-dim descriptor of a 237 x 237 tile.
///
/// Saturation and value bins use exact integer arithmetic on the 8-bit
/// channels; hue uses 45 degree bins. Means and standard deviations
/// (population) are in 8-bit units.
pub fn extract_features<T: Scalar>(tile: &RgbImage) -> Result<FeatureVector<T>> {
    if tile.width() != TILE_EDGE_PX || tile.height() != TILE_EDGE_PX {
        return Err(Error::InvalidInput(format!(
            "tile must be {TILE_EDGE_PX}x{TILE_EDGE_PX}, got {}x{}",
            tile.width(),
            tile.height()
        )));
    }
    Ok(describe_pixels(tile.as_raw()))
}

pub(crate) fn describe_pixels<T: Scalar>(raw: &[u8]) -> FeatureVector<T> {
    let mut hue = [0u64; HIST_BINS];
    let mut sat = [0u64; HIST_BINS];
    let mut val = [0u64; HIST_BINS];
    let mut sum = [0u64; 3];
    let mut sum_sq = [0u64; 3];

    for px in raw.chunks_exact(3) {
        let (r, g, b) = (u32::from(px[0]), u32::from(px[1]), u32::from(px[2]));
        let max = r.max(g).max(b);
        let min = r.min(g).min(b);
        val[unit_bin(max, 255)] += 1;
        sat[if max == 0 { 0 } else { unit_bin(max - min, max) }] += 1;
        let h_bin = if max == min {
            0
        } else {
            let (h, _, _) = rgb_to_hsv(r as f32, g as f32, b as f32);
            ((h / 45.0) as usize).min(HIST_BINS - 1)
        };
        hue[h_bin] += 1;
        for (c, v) in [r, g, b].into_iter().enumerate() {
            sum[c] += u64::from(v);
            sum_sq[c] += u64::from(v * v);
        }
    }

    let n = (raw.len() / 3) as u64;
    let nf = n as f64;
    let mut values = Vec::with_capacity(FEATURE_DIM);
    for hist in [&hue, &sat, &val] {
        values.extend(hist.iter().map(|&c| T::lit(c as f64 / nf)));
    }
    for &s in &sum {
        values.push(T::lit(s as f64 / nf));
    }
    for c in 0..3 {
        // n^2 Var = n * sum(x^2) - sum(x)^2, exact in integers
        let num = u128::from(n) * u128::from(sum_sq[c]) - u128::from(sum[c]) * u128::from(sum[c]);
        values.push(T::lit((num as f64).sqrt() / nf));
    }
    FeatureVector { values }
}
