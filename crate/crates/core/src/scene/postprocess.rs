//! Camera-like degradations: tape residue, shadows, vignetting and sensor noise.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{sample_count, sample_interval, PostprocessConfig};
use super::simplex::SimplexNoise;
use crate::raster::RgbRaster;

/// The parameters actually drawn for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PostprocessParams {
    pub residue_coverage: f64,
    pub residue_opacity: f64,
    pub shadows: u32,
    pub vignette: f64,
    pub noise_sigma: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Tape residue: pixels where a two-octave simplex field exceeds its
/// `(1 - coverage)` quantile are blended toward a tint.
pub fn apply_residue(img: &mut RgbRaster, noise: &SimplexNoise, coverage: f64, opacity: f64, scale_px: f64, tint: [f64; 3]) {
    if coverage <= 0.0 || opacity <= 0.0 || img.data.is_empty() {
        return;
    }
    let w = img.width;
    let field: Vec<f64> = (0..img.data.len())
        .map(|i| noise.two_octave((i % w) as f64 / scale_px, (i / w) as f64 / scale_px))
        .collect();
    let mut sorted = field.clone();
    let n = sorted.len();
    let k = (((1.0 - coverage) * n as f64).floor() as usize).min(n - 1);
    let (_, level, _) = sorted.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    let level = *level;
    for (px, &f) in img.data.iter_mut().zip(&field) {
        if f > level || (coverage >= 1.0) {
            for c in 0..3 {
                px[c] = (1.0 - opacity) * px[c] + opacity * tint[c];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shadow {
    /// Darkens the side `(p - origin) . normal > 0`.
    HalfPlane { origin: (f64, f64), normal: (f64, f64) },
    Ellipse { center: (f64, f64), semi_axes: (f64, f64), angle: f64 },
}

impl Shadow {
    /// Positive inside the shadowed region, in pixels.
    fn signed_distance(&self, x: f64, y: f64) -> f64 {
        match *self {
            Shadow::HalfPlane { origin, normal } => (x - origin.0) * normal.0 + (y - origin.1) * normal.1,
            Shadow::Ellipse { center, semi_axes, angle } => {
                let (s, c) = angle.sin_cos();
                let (dx, dy) = (x - center.0, y - center.1);
                let u = (c * dx + s * dy) / semi_axes.0;
                let v = (-s * dx + c * dy) / semi_axes.1;
                (1.0 - (u * u + v * v).sqrt()) * semi_axes.0.min(semi_axes.1)
            }
        }
    }
}

pub fn apply_shadow(img: &mut RgbRaster, shadow: Shadow, strength: f64, softness_px: f64) {
    let w = img.width;
    for (i, px) in img.data.iter_mut().enumerate() {
        let d = shadow.signed_distance((i % w) as f64, (i / w) as f64);
        let factor = 1.0 - strength * sigmoid(d / softness_px);
        for v in px.iter_mut() {
            *v *= factor;
        }
    }
}

/// Multiply by `1 - v (r / r_max)^2`, `r` measured from the image center and
/// `r_max` the center-to-corner-pixel distance.
pub fn apply_vignette(img: &mut RgbRaster, strength: f64) {
    if strength == 0.0 {
        return;
    }
    let cx = (img.width as f64 - 1.0) / 2.0;
    let cy = (img.height as f64 - 1.0) / 2.0;
    let r_max2 = cx * cx + cy * cy;
    if r_max2 == 0.0 {
        return;
    }
    let w = img.width;
    for (i, px) in img.data.iter_mut().enumerate() {
        let dx = (i % w) as f64 - cx;
        let dy = (i / w) as f64 - cy;
        let factor = 1.0 - strength * (dx * dx + dy * dy) / r_max2;
        for v in px.iter_mut() {
            *v *= factor;
        }
    }
}

pub fn apply_gaussian_noise(img: &mut RgbRaster, sigma: f64, rng: &mut impl Rng) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for px in img.data.iter_mut() {
        for v in px.iter_mut() {
            *v += normal.sample(rng);
        }
    }
}

fn clamp_unit(img: &mut RgbRaster) {
    for px in img.data.iter_mut() {
        for v in px.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }
}

/// Apply residue, shadows, vignette and noise in that order, then clamp.
pub fn postprocess(img: &mut RgbRaster, rng: &mut impl Rng, cfg: &PostprocessConfig) -> PostprocessParams {
    let (w, h) = (img.width as f64, img.height as f64);
    let mut params = PostprocessParams::default();

    let coverage = sample_interval(rng, cfg.residue_coverage);
    if coverage > 0.0 {
        let opacity = sample_interval(rng, cfg.residue_opacity);
        let scale = sample_interval(rng, cfg.residue_scale_px);
        let base = rng.random_range(0.4..0.9);
        let tint = [0, 1, 2].map(|_| (base + rng.random_range(-0.05..0.05f64)).clamp(0.0, 1.0));
        let noise = SimplexNoise::new(rng.random());
        apply_residue(img, &noise, coverage, opacity, scale, tint);
        params.residue_coverage = coverage;
        params.residue_opacity = opacity;
    }

    let shadows = sample_count(rng, cfg.shadow_count);
    for _ in 0..shadows {
        let strength = sample_interval(rng, cfg.shadow_strength);
        let softness = sample_interval(rng, cfg.shadow_softness_px);
        let shadow = if rng.random_bool(0.5) {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            Shadow::HalfPlane {
                origin: (rng.random_range(0.0..w), rng.random_range(0.0..h)),
                normal: (theta.cos(), theta.sin()),
            }
        } else {
            let m = w.min(h);
            Shadow::Ellipse {
                center: (rng.random_range(0.0..w), rng.random_range(0.0..h)),
                semi_axes: (rng.random_range(0.1..0.5) * m, rng.random_range(0.1..0.5) * m),
                angle: rng.random_range(0.0..std::f64::consts::PI),
            }
        };
        apply_shadow(img, shadow, strength, softness);
    }
    params.shadows = shadows;

    params.vignette = sample_interval(rng, cfg.vignette);
    apply_vignette(img, params.vignette);

    params.noise_sigma = sample_interval(rng, cfg.noise_sigma);
    apply_gaussian_noise(img, params.noise_sigma, rng);

    clamp_unit(img);
    params
}
