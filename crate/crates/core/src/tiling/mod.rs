//! Whole-slide tessellation: magnification levels, slide images, annotation
//! masks and the fixed 237 px tile grid.

mod mask;
mod slide;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use mask::{AnnotationMask, Bitmap, Polygon};
pub use slide::{downscale, SlideImage};
pub(crate) use slide::save_rgb_png as save_tile_png;

use crate::csvio;
use crate::error::{Error, Result};

/// Edge length of every tile, in pixels at the tile's own magnification.
pub const TILE_EDGE_PX: u32 = 237;

/// Resolution of the scanned base level (40x).
pub const BASE_UM_PER_PX: f64 = 0.25;

/// Nominal objective magnification of a pyramid level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Magnification {
    #[serde(rename = "40x")]
    X40,
    #[serde(rename = "20x")]
    X20,
    #[serde(rename = "10x")]
    X10,
    #[serde(rename = "5x")]
    X5,
}

impl Magnification {
    pub const ALL: [Magnification; 4] = [
        Magnification::X40,
        Magnification::X20,
        Magnification::X10,
        Magnification::X5,
    ];

    /// Micrometers per pixel at this level.
    pub fn um_per_px(self) -> f64 {
        mag_resolution(self)
    }

    /// Physical edge of a 237 px tile in micrometers.
    pub fn tile_physical_edge_um(self) -> f64 {
        tile_physical_edge(self)
    }

    /// The rounded edge length commonly quoted for each level (60/120/240/480 um).
    pub fn nominal_tile_edge_um(self) -> f64 {
        match self {
            Magnification::X40 => 60.0,
            Magnification::X20 => 120.0,
            Magnification::X10 => 240.0,
            Magnification::X5 => 480.0,
        }
    }

    /// Integer downsampling factor relative to the 40x base level.
    pub fn base_factor(self) -> u32 {
        match self {
            Magnification::X40 => 1,
            Magnification::X20 => 2,
            Magnification::X10 => 4,
            Magnification::X5 => 8,
        }
    }

    pub fn from_um_per_px(um: f64) -> Option<Magnification> {
        Magnification::ALL.into_iter().find(|m| m.um_per_px() == um)
    }

    pub fn label(self) -> &'static str {
        match self {
            Magnification::X40 => "40x",
            Magnification::X20 => "20x",
            Magnification::X10 => "10x",
            Magnification::X5 => "5x",
        }
    }
}

impl fmt::Display for Magnification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Magnification {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "40x" | "x40" => Ok(Magnification::X40),
            "20x" | "x20" => Ok(Magnification::X20),
            "10x" | "x10" => Ok(Magnification::X10),
            "5x" | "x5" => Ok(Magnification::X5),
            other => Err(Error::InvalidInput(format!("unknown magnification {other:?}"))),
        }
    }
}

/// Fixed level to resolution mapping.
pub fn mag_resolution(level: Magnification) -> f64 {
    match level {
        Magnification::X40 => 0.25,
        Magnification::X20 => 0.5,
        Magnification::X10 => 1.0,
        Magnification::X5 => 2.0,
    }
}

/// `237 * um_per_px`; 59.25 um at 40x.
pub fn tile_physical_edge(level: Magnification) -> f64 {
    f64::from(TILE_EDGE_PX) * mag_resolution(level)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stain {
    #[serde(rename = "HE")]
    HE,
    #[serde(rename = "MelanA")]
    MelanA,
}

impl Stain {
    pub const ALL: [Stain; 2] = [Stain::HE, Stain::MelanA];

    pub fn as_str(self) -> &'static str {
        match self {
            Stain::HE => "HE",
            Stain::MelanA => "MelanA",
        }
    }
}

impl fmt::Display for Stain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "HE" | "H&E" | "he" => Ok(Stain::HE),
            "MelanA" | "melana" | "MELANA" => Ok(Stain::MelanA),
            other => Err(Error::InvalidInput(format!("unknown stain {other:?}"))),
        }
    }
}

/// Position of one tile on a slide's grid at a given magnification.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileRef {
    pub slide_id: String,
    pub stain: Stain,
    pub magnification: Magnification,
    pub grid_x: u32,
    pub grid_y: u32,
    pub origin_x: u32,
    pub origin_y: u32,
    pub edge_px: u32,
}

impl TileRef {
    pub fn new(
        slide_id: impl Into<String>,
        stain: Stain,
        magnification: Magnification,
        grid_x: u32,
        grid_y: u32,
    ) -> Self {
        TileRef {
            slide_id: slide_id.into(),
            stain,
            magnification,
            grid_x,
            grid_y,
            origin_x: grid_x * TILE_EDGE_PX,
            origin_y: grid_y * TILE_EDGE_PX,
            edge_px: TILE_EDGE_PX,
        }
    }

    /// File name of the tile image: `<slide_id>_<mag>_<grid_x>_<grid_y>.png`.
    pub fn file_name(&self) -> String {
        format!(
            "{}_{}_{}_{}.png",
            self.slide_id, self.magnification, self.grid_x, self.grid_y
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TessellationParams {
    /// Minimum fraction of a tile's area that must fall inside the annotation.
    pub min_coverage: f64,
}

impl Default for TessellationParams {
    fn default() -> Self {
        TessellationParams { min_coverage: 0.5 }
    }
}

/// Cuts `image` into a non-overlapping 237 px grid anchored at (0, 0).
///
/// A tile is kept when it lies fully inside the image and at least
/// `min_coverage` of its pixels fall inside the mask. The mask is given in
/// 40x pixel coordinates and is rasterized at the image's resolution
/// (pixel centers, even-odd rule per polygon, union across polygons,
/// boundary points inside). Tiles are returned row-major.
pub fn tessellate(
    image: &SlideImage,
    mask: &AnnotationMask,
    params: &TessellationParams,
) -> Result<Vec<TileRef>> {
    if !(0.0..=1.0).contains(&params.min_coverage) {
        return Err(Error::InvalidInput(format!(
            "min_coverage must lie in [0, 1], got {}",
            params.min_coverage
        )));
    }
    let cols = image.width() / TILE_EDGE_PX;
    let rows = image.height() / TILE_EDGE_PX;
    if cols == 0 || rows == 0 || mask.polygons.is_empty() {
        return Ok(Vec::new());
    }
    let scale = f64::from(image.magnification.base_factor());
    let bitmap = mask.rasterize(cols * TILE_EDGE_PX, rows * TILE_EDGE_PX, scale);
    let tile_area = f64::from(TILE_EDGE_PX * TILE_EDGE_PX);
    let required = params.min_coverage * tile_area;

    let mut tiles = Vec::new();
    for gy in 0..rows {
        for gx in 0..cols {
            let covered = bitmap.count_in_rect(
                gx * TILE_EDGE_PX,
                gy * TILE_EDGE_PX,
                TILE_EDGE_PX,
                TILE_EDGE_PX,
            );
            if covered as f64 >= required && covered > 0 {
                tiles.push(TileRef::new(
                    image.slide_id.clone(),
                    image.stain,
                    image.magnification,
                    gx,
                    gy,
                ));
            }
        }
    }
    Ok(tiles)
}

pub const TILE_MANIFEST_HEADER: [&str; 8] = [
    "slide_id",
    "stain",
    "magnification",
    "grid_x",
    "grid_y",
    "origin_x",
    "origin_y",
    "edge_px",
];

pub fn write_tile_manifest<W: Write>(out: W, tiles: &[TileRef]) -> Result<()> {
    let mut w = csvio::writer(out);
    w.write_record(TILE_MANIFEST_HEADER)?;
    for t in tiles {
        w.write_record([
            t.slide_id.clone(),
            t.stain.to_string(),
            t.magnification.to_string(),
            t.grid_x.to_string(),
            t.grid_y.to_string(),
            t.origin_x.to_string(),
            t.origin_y.to_string(),
            t.edge_px.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<tile manifest>", e))?;
    Ok(())
}

pub fn read_tile_manifest<R: Read>(input: R, name: &str) -> Result<Vec<TileRef>> {
    let mut reader = csvio::reader(input, name, &TILE_MANIFEST_HEADER)?;
    let mut tiles = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let field = |k: usize| csvio::field(&record, k, name, row);
        let tile = TileRef {
            slide_id: field(0)?.to_string(),
            stain: csvio::parse(field(1)?, name, row)?,
            magnification: csvio::parse(field(2)?, name, row)?,
            grid_x: csvio::parse(field(3)?, name, row)?,
            grid_y: csvio::parse(field(4)?, name, row)?,
            origin_x: csvio::parse(field(5)?, name, row)?,
            origin_y: csvio::parse(field(6)?, name, row)?,
            edge_px: csvio::parse(field(7)?, name, row)?,
        };
        tiles.push(tile);
    }
    Ok(tiles)
}
