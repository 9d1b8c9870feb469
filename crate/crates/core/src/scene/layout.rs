//! Scattering shapes on an empty canvas to build a layer-count map.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{sample_count, sample_interval, SceneConfig};
use crate::error::{Error, Result};
use crate::raster::BinaryMask;
use crate::shapes::ShapeLibrary;

/// Per-pixel number of stacked layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerMap {
    pub width: usize,
    pub height: usize,
    pub counts: Vec<u16>,
}

impl LayerMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            counts: vec![0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.counts[y * self.width + x]
    }

    /// Add `layers` under every set pixel of `mask`, whose top-left corner
    /// goes to canvas position `(x0, y0)`. Pixels falling off the canvas are
    /// dropped. Returns the number of pixels that landed.
    pub fn stamp(&mut self, mask: &BinaryMask, x0: isize, y0: isize, layers: u16) -> usize {
        let mut landed = 0;
        for y in 0..mask.height {
            let cy = y0 + y as isize;
            if cy < 0 || cy >= self.height as isize {
                continue;
            }
            for x in 0..mask.width {
                let cx = x0 + x as isize;
                if cx < 0 || cx >= self.width as isize || !mask.get(x, y) {
                    continue;
                }
                let c = &mut self.counts[cy as usize * self.width + cx as usize];
                *c = c.saturating_add(layers);
                landed += 1;
            }
        }
        landed
    }

    /// Distinct counts present, ascending.
    pub fn distinct_counts(&self) -> Vec<u16> {
        let mut seen = std::collections::BTreeSet::new();
        seen.extend(self.counts.iter().copied());
        seen.into_iter().collect()
    }
}

/// Visible footprint on the canvas of a mask placed at `(x0, y0)`.
fn visible_pixels(mask: &BinaryMask, x0: isize, y0: isize, width: usize, height: usize) -> usize {
    let mut n = 0;
    for y in 0..mask.height {
        let cy = y0 + y as isize;
        if cy < 0 || cy >= height as isize {
            continue;
        }
        for x in 0..mask.width {
            let cx = x0 + x as isize;
            if cx >= 0 && cx < width as isize && mask.get(x, y) {
                n += 1;
            }
        }
    }
    n
}

/// Rotate by `angle_deg` (counter-clockwise) and scale a mask with
/// nearest-neighbor inverse mapping about its center.
pub fn transform_mask(mask: &BinaryMask, angle_deg: f64, scale: f64) -> BinaryMask {
    let (sw, sh) = (mask.width as f64, mask.height as f64);
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let half_w = 0.5 * scale * (sw * cos.abs() + sh * sin.abs());
    let half_h = 0.5 * scale * (sw * sin.abs() + sh * cos.abs());
    let ow = (2.0 * half_w - 1e-9).ceil().max(0.0) as usize;
    let oh = (2.0 * half_h - 1e-9).ceil().max(0.0) as usize;
    let (ocx, ocy) = (ow as f64 / 2.0, oh as f64 / 2.0);
    let out = BinaryMask::from_fn(ow, oh, |x, y| {
        let dx = x as f64 + 0.5 - ocx;
        let dy = y as f64 + 0.5 - ocy;
        // inverse rotation then inverse scale
        let sx = (cos * dx + sin * dy) / scale + sw / 2.0;
        let sy = (-sin * dx + cos * dy) / scale + sh / 2.0;
        if sx < 0.0 || sy < 0.0 {
            return false;
        }
        let (ix, iy) = (sx.floor() as usize, sy.floor() as usize);
        ix < mask.width && iy < mask.height && mask.get(ix, iy)
    });
    out.crop_tight().unwrap_or_else(|| BinaryMask::new(0, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub shape_index: usize,
    pub angle_deg: f64,
    pub scale: f64,
    /// Top-left canvas position of the transformed mask.
    pub x0: isize,
    pub y0: isize,
    pub layers: u32,
    pub pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementLog {
    pub requested: u32,
    pub placements: Vec<Placement>,
    pub skipped: u32,
}

/// Scatter a random number of library shapes over an empty canvas.
pub fn sample_scene(
    config: &SceneConfig,
    library: &ShapeLibrary,
    rng: &mut impl Rng,
) -> Result<(LayerMap, PlacementLog)> {
    if library.is_empty() {
        return Err(Error::InvalidInput("shape library is empty".into()));
    }
    let (w, h) = (config.width, config.height);
    let mut map = LayerMap::new(w, h);
    let requested = sample_count(rng, config.shape_count);
    let mut placements = Vec::with_capacity(requested as usize);
    let mut skipped = 0;

    for _ in 0..requested {
        let mut placed = false;
        for _ in 0..=config.placement_retries {
            let shape_index = rng.random_range(0..library.len());
            let angle_deg = sample_interval(rng, config.rotation_deg);
            let scale = sample_interval(rng, config.scale);
            let layers = config.sample_layers(rng);
            let cx = rng.random_range(0.0..w as f64);
            let cy = rng.random_range(0.0..h as f64);
            let mask = transform_mask(&library.shapes[shape_index].mask, angle_deg, scale);
            let area = mask.count();
            if area == 0 {
                continue;
            }
            let x0 = (cx - mask.width as f64 / 2.0).round() as isize;
            let y0 = (cy - mask.height as f64 / 2.0).round() as isize;
            let visible = visible_pixels(&mask, x0, y0, w, h);
            if (visible as f64) < config.min_visible_fraction * area as f64 || visible == 0 {
                continue;
            }
            let pixels = map.stamp(&mask, x0, y0, layers as u16);
            placements.push(Placement {
                shape_index,
                angle_deg,
                scale,
                x0,
                y0,
                layers,
                pixels,
            });
            placed = true;
            break;
        }
        if !placed {
            skipped += 1;
        }
    }
    Ok((
        map,
        PlacementLog {
            requested,
            placements,
            skipped,
        },
    ))
}
