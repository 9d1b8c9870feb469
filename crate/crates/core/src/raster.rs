//! Plain row-major rasters shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 8-bit luminance image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "gray image data has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }
}

/// Binary raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "mask has {} bits, expected {}x{}",
                bits.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    /// Axis-aligned filled rectangle `[x0, x0+w) x [y0, y0+h)`, clipped to the canvas.
    pub fn rect(width: usize, height: usize, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Self::from_fn(width, height, |x, y| {
            x >= x0 && x < x0 + w && y >= y0 && y < y0 + h
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }

    pub fn intersection_count(&self, other: &Self) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a && b)
            .count()
    }

    /// Bounding box `(x0, y0, x1, y1)` with exclusive upper bounds, `None` when empty.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    bbox = Some(match bbox {
                        None => (x, y, x + 1, y + 1),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x + 1), y1.max(y + 1)),
                    });
                }
            }
        }
        bbox
    }

    pub fn crop(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self::from_fn(x1 - x0, y1 - y0, |x, y| self.get(x0 + x, y0 + y))
    }

    /// Tight crop around the set pixels; `None` for an empty mask.
    pub fn crop_tight(&self) -> Option<Self> {
        self.bounding_box()
            .map(|(x0, y0, x1, y1)| self.crop(x0, y0, x1, y1))
    }

    /// True when set pixels touch all four edges of the raster.
    pub fn is_tight(&self) -> bool {
        if self.width == 0 || self.height == 0 {
            return false;
        }
        let top = (0..self.width).any(|x| self.get(x, 0));
        let bottom = (0..self.width).any(|x| self.get(x, self.height - 1));
        let left = (0..self.height).any(|y| self.get(0, y));
        let right = (0..self.height).any(|y| self.get(self.width - 1, y));
        top && bottom && left && right
    }

    /// Erosion with a `(2r+1)^2` square; pixels outside the raster count as unset.
    pub fn erode(&self, radius: usize) -> Self {
        if radius == 0 {
            return self.clone();
        }
        let r = radius as isize;
        let (w, h) = (self.width as isize, self.height as isize);
        Self::from_fn(self.width, self.height, |x, y| {
            if !self.get(x, y) {
                return false;
            }
            for dy in -r..=r {
                for dx in -r..=r {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h || !self.get(nx as usize, ny as usize) {
                        return false;
                    }
                }
            }
            true
        })
    }

    pub fn dilate(&self, radius: usize) -> Self {
        if radius == 0 {
            return self.clone();
        }
        let r = radius as isize;
        let (w, h) = (self.width as isize, self.height as isize);
        let mut out = Self::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.get(x, y) {
                    continue;
                }
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (nx, ny) = (x as isize + dx, y as isize + dy);
                        if nx >= 0 && ny >= 0 && nx < w && ny < h {
                            out.set(nx as usize, ny as usize, true);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn open(&self, radius: usize) -> Self {
        self.erode(radius).dilate(radius)
    }
}

/// A mask stored as its bounding-box crop plus the crop offset within a
/// larger canvas. Instance masks are small relative to the image, so this is
/// the representation used for instances, annotations and matching.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    pub canvas_width: usize,
    pub canvas_height: usize,
    pub x0: usize,
    pub y0: usize,
    /// Crop; may be empty (0x0) for an empty region.
    pub crop: BinaryMask,
}

impl RegionMask {
    pub fn empty(canvas_width: usize, canvas_height: usize) -> Self {
        Self {
            canvas_width,
            canvas_height,
            x0: 0,
            y0: 0,
            crop: BinaryMask::new(0, 0),
        }
    }

    pub fn from_full(mask: &BinaryMask) -> Self {
        match mask.bounding_box() {
            None => Self::empty(mask.width, mask.height),
            Some((x0, y0, x1, y1)) => Self {
                canvas_width: mask.width,
                canvas_height: mask.height,
                x0,
                y0,
                crop: mask.crop(x0, y0, x1, y1),
            },
        }
    }

    pub fn to_full(&self) -> BinaryMask {
        let mut full = BinaryMask::new(self.canvas_width, self.canvas_height);
        for y in 0..self.crop.height {
            for x in 0..self.crop.width {
                if self.crop.get(x, y) {
                    full.set(self.x0 + x, self.y0 + y, true);
                }
            }
        }
        full
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.canvas_width, self.canvas_height)
    }

    pub fn area(&self) -> usize {
        self.crop.count()
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        x >= self.x0
            && y >= self.y0
            && x < self.x0 + self.crop.width
            && y < self.y0 + self.crop.height
            && self.crop.get(x - self.x0, y - self.y0)
    }

    /// Canvas coordinates of every set pixel, row-major.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.crop.height).flat_map(move |y| {
            (0..self.crop.width)
                .filter(move |&x| self.crop.get(x, y))
                .map(move |x| (self.x0 + x, self.y0 + y))
        })
    }

    pub fn intersection_count(&self, other: &Self) -> usize {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = (self.x0 + self.crop.width).min(other.x0 + other.crop.width);
        let y1 = (self.y0 + self.crop.height).min(other.y0 + other.crop.height);
        let mut n = 0;
        for y in y0..y1 {
            for x in x0..x1 {
                if self.crop.get(x - self.x0, y - self.y0) && other.crop.get(x - other.x0, y - other.y0) {
                    n += 1;
                }
            }
        }
        n
    }

    /// Erosion; the crop is tight so pixels outside it are unset.
    pub fn erode(&self, radius: usize) -> Self {
        let eroded = Self {
            crop: self.crop.erode(radius),
            ..self.clone()
        };
        eroded.retighten()
    }

    fn retighten(&self) -> Self {
        match self.crop.bounding_box() {
            None => Self::empty(self.canvas_width, self.canvas_height),
            Some((x0, y0, x1, y1)) => Self {
                canvas_width: self.canvas_width,
                canvas_height: self.canvas_height,
                x0: self.x0 + x0,
                y0: self.y0 + y0,
                crop: self.crop.crop(x0, y0, x1, y1),
            },
        }
    }
}

/// Floating point RGB raster. Units depend on the producer: the renderer
/// writes reflectance-like values in `[0, 1]`, [`RgbRaster::from_rgb8`] keeps
/// 8-bit levels `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbRaster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 3]>,
}

impl RgbRaster {
    pub fn filled(width: usize, height: usize, value: [f64; 3]) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: [f64; 3]) {
        self.data[y * self.width + x] = value;
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// 8-bit levels, unscaled.
    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        let (w, h) = img.dimensions();
        let data = img
            .pixels()
            .map(|p| [f64::from(p[0]), f64::from(p[1]), f64::from(p[2])])
            .collect();
        Self {
            width: w as usize,
            height: h as usize,
            data,
        }
    }

    /// Quantize a `[0, 1]` raster to 8 bits, clamping out-of-range values.
    pub fn to_rgb8(&self) -> image::RgbImage {
        let mut out = image::RgbImage::new(self.width as u32, self.height as u32);
        for (dst, src) in out.pixels_mut().zip(&self.data) {
            for c in 0..3 {
                dst[c] = (src[c].clamp(0.0, 1.0) * 255.0).round() as u8;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erosion_of_solid_square_shrinks_by_one() {
        let m = BinaryMask::rect(20, 20, 5, 5, 10, 10);
        let e = m.erode(1);
        assert_eq!(e.count(), 64);
        assert_eq!(e.bounding_box(), Some((6, 6, 14, 14)));
        assert_eq!(e.dilate(1), m);
    }

    #[test]
    fn opening_removes_specks() {
        let mut m = BinaryMask::rect(20, 20, 2, 2, 8, 8);
        m.set(15, 15, true);
        let o = m.open(1);
        assert!(!o.get(15, 15));
        assert_eq!(o.count(), 64);
    }

    #[test]
    fn region_round_trip_and_intersection() {
        let a = BinaryMask::rect(12, 9, 2, 3, 4, 4);
        let b = BinaryMask::rect(12, 9, 4, 1, 5, 3);
        let (ra, rb) = (RegionMask::from_full(&a), RegionMask::from_full(&b));
        assert_eq!(ra.to_full(), a);
        assert_eq!(ra.intersection_count(&rb), a.intersection_count(&b));
        assert_eq!(ra.erode(1).to_full(), a.erode(1));
        assert_eq!(ra.pixels().count(), 16);
        assert!(RegionMask::from_full(&BinaryMask::new(3, 3)).to_full().is_empty());
    }

    #[test]
    fn tight_crop() {
        let m = BinaryMask::rect(10, 10, 3, 4, 2, 5);
        let c = m.crop_tight().unwrap();
        assert_eq!(c.dims(), (2, 5));
        assert!(c.is_tight());
        assert!(BinaryMask::new(4, 4).crop_tight().is_none());
    }
}
