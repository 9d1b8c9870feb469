use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed sampling interval `[min, max]`; `min == max` fixes the value.
pub type Interval = [f64; 2];

pub(crate) fn sample_interval(rng: &mut impl Rng, [lo, hi]: Interval) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

pub(crate) fn sample_count(rng: &mut impl Rng, [lo, hi]: [u32; 2]) -> u32 {
    rng.random_range(lo..=hi)
}

fn check_interval(name: &str, [lo, hi]: Interval, min: f64, max: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi || lo < min || hi > max {
        return Err(Error::Config(format!(
            "{name} = [{lo}, {hi}] must satisfy {min} <= min <= max <= {max}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PostprocessConfig {
    /// Additive Gaussian noise standard deviation, in `[0, 1]` intensity units.
    pub noise_sigma: Interval,
    /// Vignette strength `v` in `1 - v (r / r_max)^2`.
    pub vignette: Interval,
    pub shadow_count: [u32; 2],
    /// Peak multiplicative darkening of one shadow.
    pub shadow_strength: Interval,
    /// Sigmoid edge width of a shadow, in pixels.
    pub shadow_softness_px: Interval,
    /// Fraction of the image covered by tape residue.
    pub residue_coverage: Interval,
    pub residue_opacity: Interval,
    /// Feature size of the residue noise field, in pixels.
    pub residue_scale_px: Interval,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        Self {
            noise_sigma: [1.0 / 255.0, 3.0 / 255.0],
            vignette: [0.0, 0.08],
            shadow_count: [0, 2],
            shadow_strength: [0.02, 0.08],
            shadow_softness_px: [20.0, 80.0],
            residue_coverage: [0.0, 0.08],
            residue_opacity: [0.05, 0.2],
            residue_scale_px: [40.0, 160.0],
        }
    }
}

impl PostprocessConfig {
    /// Every effect disabled.
    pub fn none() -> Self {
        Self {
            noise_sigma: [0.0, 0.0],
            vignette: [0.0, 0.0],
            shadow_count: [0, 0],
            shadow_strength: [0.0, 0.0],
            shadow_softness_px: [1.0, 1.0],
            residue_coverage: [0.0, 0.0],
            residue_opacity: [0.0, 0.0],
            residue_scale_px: [1.0, 1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_interval("noise_sigma", self.noise_sigma, 0.0, 1.0)?;
        check_interval("vignette", self.vignette, 0.0, 1.0)?;
        check_interval("shadow_strength", self.shadow_strength, 0.0, 1.0)?;
        check_interval("shadow_softness_px", self.shadow_softness_px, 1e-6, f64::MAX)?;
        check_interval("residue_coverage", self.residue_coverage, 0.0, 1.0)?;
        check_interval("residue_opacity", self.residue_opacity, 0.0, 1.0)?;
        check_interval("residue_scale_px", self.residue_scale_px, 1e-6, f64::MAX)?;
        if self.shadow_count[0] > self.shadow_count[1] {
            return Err(Error::Config("shadow_count min exceeds max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub material: String,
    pub width: usize,
    pub height: usize,
    pub shape_count: [u32; 2],
    /// Multiplicative scale applied to mined shapes.
    pub scale: Interval,
    pub rotation_deg: Interval,
    /// Per-shape layer counts are drawn from `1..=max_layers`.
    pub max_layers: u32,
    /// Optional relative weights for layer counts `1..=max_layers`; uniform when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer_weights: Option<Vec<f64>>,
    /// SiO2 thickness, sampled once per image.
    pub substrate_nm: Interval,
    /// Layer counts above this are labeled with the catch-all class; the
    /// material default applies when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annotated_layers: Option<u32>,
    /// Instances smaller than this are left out of the annotations.
    pub min_instance_area: usize,
    /// A clipped placement is kept when at least this fraction stays on the canvas.
    pub min_visible_fraction: f64,
    pub placement_retries: u32,
    /// Scalar camera gain chosen so the bare substrate's mean channel value
    /// lands here; `None` keeps raw reflectance units. Contrast is unaffected.
    pub exposure_target: Option<f64>,
    pub postprocess: PostprocessConfig,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            material: "graphene".into(),
            width: 512,
            height: 512,
            shape_count: [1, 500],
            scale: [0.25, 1.5],
            rotation_deg: [0.0, 360.0],
            max_layers: 10,
            layer_weights: None,
            substrate_nm: [85.0, 95.0],
            annotated_layers: None,
            min_instance_area: 1,
            min_visible_fraction: 0.5,
            placement_retries: 10,
            exposure_target: Some(0.55),
            postprocess: PostprocessConfig::default(),
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("image size must be non-zero".into()));
        }
        let [lo, hi] = self.shape_count;
        if lo < 1 || hi > 500 || lo > hi {
            return Err(Error::Config(format!(
                "shape_count = [{lo}, {hi}] must lie within [1, 500]"
            )));
        }
        check_interval("scale", self.scale, 1e-6, 1e6)?;
        check_interval("rotation_deg", self.rotation_deg, -360.0, 360.0)?;
        check_interval("substrate_nm", self.substrate_nm, 0.0, 1e5)?;
        check_interval("min_visible_fraction", [self.min_visible_fraction; 2], 0.0, 1.0)?;
        if self.max_layers < 1 {
            return Err(Error::Config("max_layers must be at least 1".into()));
        }
        if let Some(w) = &self.layer_weights {
            if w.len() != self.max_layers as usize
                || w.iter().any(|v| !(v.is_finite() && *v >= 0.0))
                || !(w.iter().sum::<f64>() > 0.0)
            {
                return Err(Error::Config(format!(
                    "layer_weights needs {} non-negative entries with a positive sum",
                    self.max_layers
                )));
            }
        }
        if let Some(t) = self.exposure_target {
            check_interval("exposure_target", [t; 2], 1e-3, 1.0)?;
        }
        if self.annotated_layers == Some(0) {
            return Err(Error::Config("annotated_layers must be at least 1".into()));
        }
        self.postprocess.validate()
    }

    pub(crate) fn sample_layers(&self, rng: &mut impl Rng) -> u32 {
        match &self.layer_weights {
            None => rng.random_range(1..=self.max_layers),
            Some(w) => {
                let total: f64 = w.iter().sum();
                let mut u = rng.random_range(0.0..total);
                for (i, &wi) in w.iter().enumerate() {
                    if u < wi {
                        return i as u32 + 1;
                    }
                    u -= wi;
                }
                self.max_layers
            }
        }
    }
}
