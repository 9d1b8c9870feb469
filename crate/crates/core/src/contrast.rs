//! Background estimation and per-channel Weber contrast.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, RegionMask, RgbRaster};

const BINS: usize = 32;
const FULL_SCALE: f64 = 256.0;
const DOWNSAMPLE: usize = 4;

pub type ContrastPoint = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundEstimate {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl BackgroundEstimate {
    pub fn new(r: f64, g: f64, b: f64) -> Result<Self> {
        let bg = Self { r, g, b };
        if bg.to_array().iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Background(format!("channels must be positive, got ({r}, {g}, {b})")));
        }
        Ok(bg)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<ContrastPoint>,
}

impl ContrastImage {
    pub fn get(&self, x: usize, y: usize) -> ContrastPoint {
        self.data[y * self.width + x]
    }
}

fn block_means(img: &RgbRaster) -> Vec<[f64; 3]> {
    let (w, h) = img.dims();
    let mut out = Vec::with_capacity(w.div_ceil(DOWNSAMPLE) * h.div_ceil(DOWNSAMPLE));
    for by in (0..h).step_by(DOWNSAMPLE) {
        for bx in (0..w).step_by(DOWNSAMPLE) {
            let mut sum = [0.0; 3];
            let mut n = 0.0;
            for y in by..(by + DOWNSAMPLE).min(h) {
                for x in bx..(bx + DOWNSAMPLE).min(w) {
                    let p = img.get(x, y);
                    for c in 0..3 {
                        sum[c] += p[c];
                    }
                    n += 1.0;
                }
            }
            out.push(sum.map(|s| s / n));
        }
    }
    out
}

fn bin_of(v: f64) -> usize {
    ((v / FULL_SCALE * BINS as f64).floor().max(0.0) as usize).min(BINS - 1)
}

/// Substrate color of an image in 8-bit level units (`[0, 255]`, as produced
/// by [`RgbRaster::from_rgb8`]). Assumes the substrate covers most of the view.
pub fn estimate_background(img: &RgbRaster) -> Result<BackgroundEstimate> {
    if img.data.is_empty() {
        return Err(Error::Background("empty image".into()));
    }
    let small = block_means(img);
    let mut bg = [0.0; 3];
    for c in 0..3 {
        let mut hist = [0usize; BINS];
        for p in &small {
            hist[bin_of(p[c])] += 1;
        }
        // first maximum wins on ties
        let mode = (0..BINS).fold(0, |best, i| if hist[i] > hist[best] { i } else { best });
        let (lo, hi) = (mode.saturating_sub(1), (mode + 1).min(BINS - 1));
        let (sum, n) = img
            .data
            .iter()
            .map(|p| p[c])
            .filter(|&v| (lo..=hi).contains(&bin_of(v)))
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        bg[c] = if n > 0 {
            sum / n as f64
        } else {
            // block averaging can create values no single pixel has
            small.iter().map(|p| p[c]).filter(|&v| bin_of(v) == mode).sum::<f64>() / hist[mode] as f64
        };
    }
    BackgroundEstimate::new(bg[0], bg[1], bg[2])
        .map_err(|_| Error::Background(format!("degenerate image: background ({}, {}, {})", bg[0], bg[1], bg[2])))
}

/// Per-channel `(I - B) / B`.
pub fn to_contrast(img: &RgbRaster, bg: BackgroundEstimate) -> ContrastImage {
    let b = bg.to_array();
    ContrastImage {
        width: img.width,
        height: img.height,
        data: img
            .data
            .iter()
            .map(|p| [(p[0] - b[0]) / b[0], (p[1] - b[1]) / b[1], (p[2] - b[2]) / b[2]])
            .collect(),
    }
}

/// Contrast of every pixel of the mask eroded by one pixel, or of the whole
/// mask when erosion would leave nothing.
pub fn extract_region_contrasts(cimg: &ContrastImage, mask: &RegionMask) -> Result<Vec<ContrastPoint>> {
    if mask.dims() != (cimg.width, cimg.height) {
        return Err(Error::DimensionMismatch {
            expected: (cimg.width, cimg.height),
            actual: mask.dims(),
        });
    }
    if mask.area() == 0 {
        return Err(Error::InvalidInput("cannot extract contrasts from an empty mask".into()));
    }
    let eroded = mask.erode(1);
    let used = if eroded.area() > 0 { &eroded } else { mask };
    Ok(used.pixels().map(|(x, y)| cimg.get(x, y)).collect())
}

pub fn extract_instance_contrasts(cimg: &ContrastImage, mask: &BinaryMask) -> Result<Vec<ContrastPoint>> {
    extract_region_contrasts(cimg, &RegionMask::from_full(mask))
}
