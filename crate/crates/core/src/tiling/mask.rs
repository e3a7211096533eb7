use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed polygon in 40x pixel coordinates; the last vertex connects to the first.
pub type Polygon = Vec<[f64; 2]>;

/// Tumor annotation of one slide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationMask {
    pub slide_id: String,
    pub polygons: Vec<Polygon>,
}

impl AnnotationMask {
    pub fn new(slide_id: impl Into<String>, polygons: Vec<Polygon>) -> Result<Self> {
        let mask = AnnotationMask {
            slide_id: slide_id.into(),
            polygons,
        };
        mask.validate()?;
        Ok(mask)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, poly) in self.polygons.iter().enumerate() {
            if poly.len() < 3 {
                return Err(Error::InvalidInput(format!(
                    "slide {}: polygon {i} has {} vertices, need at least 3",
                    self.slide_id,
                    poly.len()
                )));
            }
            if poly
                .iter()
                .any(|&[x, y]| !(x.is_finite() && y.is_finite() && x >= 0.0 && y >= 0.0))
            {
                return Err(Error::InvalidInput(format!(
                    "slide {}: polygon {i} has negative or non-finite coordinates",
                    self.slide_id
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mask: AnnotationMask = serde_json::from_str(text)?;
        mask.validate()?;
        Ok(mask)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Rasterizes the mask onto a `width x height` grid whose pixels are
    /// `scale` base pixels wide. A pixel is set when its center lies inside
    /// any polygon (even-odd rule within a polygon, boundary counts inside).
    pub fn rasterize(&self, width: u32, height: u32, scale: f64) -> Bitmap {
        let mut bitmap = Bitmap::new(width, height);
        let mut crossings: Vec<f64> = Vec::new();
        for y in 0..height {
            let yc = (f64::from(y) + 0.5) * scale;
            let row = &mut bitmap.bits[(y as usize) * (width as usize)..][..width as usize];
            for poly in &self.polygons {
                crossings.clear();
                let n = poly.len();
                for i in 0..n {
                    let [x0, y0] = poly[i];
                    let [x1, y1] = poly[(i + 1) % n];
                    if y0 == y1 {
                        if y0 == yc {
                            fill_span(row, x0.min(x1), x0.max(x1), scale);
                        }
                        continue;
                    }
                    if (y0 <= yc && yc < y1) || (y1 <= yc && yc < y0) {
                        crossings.push(x0 + (yc - y0) * (x1 - x0) / (y1 - y0));
                    } else if (y0 == yc) || (y1 == yc) {
                        // Vertex on the scanline that the half-open rule skips.
                        let x = if y0 == yc { x0 } else { x1 };
                        fill_span(row, x, x, scale);
                    }
                }
                crossings.sort_by(|a, b| a.total_cmp(b));
                for pair in crossings.chunks_exact(2) {
                    fill_span(row, pair[0], pair[1], scale);
                }
            }
        }
        bitmap
    }
}

/// Sets every pixel whose center `(x + 0.5) * scale` lies in `[lo, hi]`.
fn fill_span(row: &mut [bool], lo: f64, hi: f64, scale: f64) {
    let first = (lo / scale - 0.5).ceil().max(0.0);
    let last = (hi / scale - 0.5).floor();
    if last < first {
        return;
    }
    let last = (last as usize).min(row.len().saturating_sub(1));
    let first = first as usize;
    if first >= row.len() {
        return;
    }
    row[first..=last].iter_mut().for_each(|b| *b = true);
}

/// Binary raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Bitmap {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(width: u32, height: u32) -> Self {
        Bitmap {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn count_in_rect(&self, x: u32, y: u32, w: u32, h: u32) -> usize {
        let stride = self.width as usize;
        (y..(y + h).min(self.height))
            .map(|yy| {
                let start = yy as usize * stride + x as usize;
                let end = yy as usize * stride + (x + w).min(self.width) as usize;
                self.bits[start..end].iter().filter(|&&b| b).count()
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_polygons() {
        assert!(AnnotationMask::new("s", vec![vec![[0.0, 0.0], [1.0, 1.0]]]).is_err());
        assert!(AnnotationMask::new("s", vec![vec![[0.0, 0.0], [1.0, -1.0], [2.0, 0.0]]]).is_err());
    }

    #[test]
    fn json_schema() {
        let text = r#"{"slide_id": "S1", "polygons": [[[0,0],[10,0],[10,10]]]}"#;
        let mask = AnnotationMask::from_json(text).unwrap();
        assert_eq!(mask.slide_id, "S1");
        assert_eq!(mask.polygons[0][1], [10.0, 0.0]);
    }

    #[test]
    fn rectangle_area_is_exact() {
        let mask =
            AnnotationMask::new("s", vec![vec![[0.0, 0.0], [10.0, 0.0], [10.0, 6.0], [0.0, 6.0]]])
                .unwrap();
        let bm = mask.rasterize(20, 20, 1.0);
        assert_eq!(bm.count(), 60);
        assert!(bm.get(0, 0) && bm.get(9, 5) && !bm.get(10, 0) && !bm.get(0, 6));
    }

    #[test]
    fn even_odd_within_self_intersecting_polygon() {
        // A pentagram: the inner pentagon is filled an even number of times.
        let star: Polygon = (0..5)
            .map(|k| {
                let a = std::f64::consts::PI * 2.0 * f64::from(k * 2) / 5.0 - std::f64::consts::FRAC_PI_2;
                [50.0 + 40.0 * a.cos(), 50.0 + 40.0 * a.sin()]
            })
            .collect();
        let mask = AnnotationMask::new("s", vec![star]).unwrap();
        let bm = mask.rasterize(100, 100, 1.0);
        assert!(!bm.get(50, 52), "center of a pentagram is a hole under even-odd");
        assert!(bm.get(50, 15), "tip is filled");
    }

    #[test]
    fn overlapping_polygons_form_a_union() {
        let a = vec![[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]];
        let b = vec![[5.0, 0.0], [15.0, 0.0], [15.0, 10.0], [5.0, 10.0]];
        let mask = AnnotationMask::new("s", vec![a, b]).unwrap();
        assert_eq!(mask.rasterize(20, 20, 1.0).count(), 150);
    }

    #[test]
    fn polygon_order_does_not_matter() {
        let a = vec![[0.0, 0.0], [30.0, 3.0], [12.0, 25.0]];
        let b = vec![[10.0, 10.0], [40.0, 12.0], [33.0, 39.0], [8.0, 30.0]];
        let m1 = AnnotationMask::new("s", vec![a.clone(), b.clone()]).unwrap();
        let m2 = AnnotationMask::new("s", vec![b, a]).unwrap();
        assert_eq!(m1.rasterize(50, 50, 1.0), m2.rasterize(50, 50, 1.0));
    }

    #[test]
    fn boundary_pixel_centers_are_inside() {
        // Edge passes exactly through pixel centers x = 4.5.
        let mask =
            AnnotationMask::new("s", vec![vec![[0.0, 0.0], [4.5, 0.0], [4.5, 3.0], [0.0, 3.0]]])
                .unwrap();
        let bm = mask.rasterize(10, 10, 1.0);
        assert!(bm.get(4, 1));
        assert!(!bm.get(5, 1));
    }
}
