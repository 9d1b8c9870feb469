//! Classical flake detection: contrast projection, per-pixel density
//! classification, morphological cleanup and per-class components.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::contrast::{estimate_background, extract_region_contrasts, to_contrast, ContrastImage};
use crate::error::{Error, Result};
use crate::mixture::{Classifier, ClassifierModel, LabeledContrastSet};
use crate::raster::{BinaryMask, RegionMask, RgbRaster};
use crate::rng::derived_rng;
use crate::shapes::{connected_components, Connectivity};

/// Dataset label reserved for bare substrate.
pub const BACKGROUND_LABEL: u32 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorParams {
    pub min_area: usize,
    pub opening_radius: usize,
    /// Treat low-density pixels as background.
    pub rejection: bool,
    pub connectivity: Connectivity,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            min_area: 200,
            opening_radius: 1,
            rejection: true,
            connectivity: Connectivity::Eight,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_area == 0 {
            return Err(Error::Config("min_area must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectedInstance {
    pub mask: RegionMask,
    pub class_label: u32,
    /// Mean of the per-pixel maximum posterior.
    pub confidence: f64,
    pub area: usize,
}

/// Per-pixel result of [`classify_pixels`].
#[derive(Debug, Clone, PartialEq)]
pub struct PixelClasses {
    pub width: usize,
    pub height: usize,
    /// Dataset label per pixel; [`BACKGROUND_LABEL`] for background or rejected pixels.
    pub labels: Vec<u32>,
    /// Largest posterior per pixel.
    pub confidence: Vec<f64>,
}

/// Classify every pixel of a contrast image. Identical contrasts share one
/// classifier evaluation.
pub fn classify_pixels(cimg: &ContrastImage, classifier: &ClassifierModel, rejection: bool) -> PixelClasses {
    let mut cache: HashMap<[u64; 3], (u32, f64)> = HashMap::new();
    let mut labels = Vec::with_capacity(cimg.data.len());
    let mut confidence = Vec::with_capacity(cimg.data.len());
    for p in &cimg.data {
        let key = p.map(f64::to_bits);
        let (label, conf) = *cache.entry(key).or_insert_with(|| {
            let c = classifier.classify(p);
            let label = if rejection && c.rejected {
                BACKGROUND_LABEL
            } else {
                classifier.class_labels[c.class]
            };
            (label, c.posteriors[c.class])
        });
        labels.push(label);
        confidence.push(conf);
    }
    PixelClasses {
        width: cimg.width,
        height: cimg.height,
        labels,
        confidence,
    }
}

/// Turn per-pixel classes into instances: per-class opening, connected
/// components and the area filter.
pub fn extract_instances(pixels: &PixelClasses, params: &DetectorParams) -> Vec<DetectedInstance> {
    let classes: BTreeSet<u32> = pixels.labels.iter().copied().filter(|&l| l != BACKGROUND_LABEL).collect();
    let mut out = Vec::new();
    for class in classes {
        let raw = BinaryMask::from_bits(
            pixels.width,
            pixels.height,
            pixels.labels.iter().map(|&l| l == class).collect(),
        )
        .expect("dimensions match");
        let opened = if params.opening_radius > 0 { raw.open(params.opening_radius) } else { raw };
        let labeling = connected_components(&opened, params.connectivity);
        for comp in &labeling.components {
            if comp.area < params.min_area {
                continue;
            }
            let mask = RegionMask {
                canvas_width: pixels.width,
                canvas_height: pixels.height,
                x0: comp.bbox.0,
                y0: comp.bbox.1,
                crop: labeling.cropped_mask_of(comp.label),
            };
            let sum: f64 = mask.pixels().map(|(x, y)| pixels.confidence[y * pixels.width + x]).sum();
            out.push(DetectedInstance {
                confidence: (sum / comp.area as f64).clamp(0.0, 1.0),
                area: comp.area,
                mask,
                class_label: class,
            });
        }
    }
    out
}

/// Detect flakes in an image given in 8-bit level units.
pub fn detect(image: &RgbRaster, classifier: &ClassifierModel, params: &DetectorParams) -> Result<Vec<DetectedInstance>> {
    params.validate()?;
    let bg = estimate_background(image)?;
    let cimg = to_contrast(image, bg);
    let pixels = classify_pixels(&cimg, classifier, params.rejection);
    Ok(extract_instances(&pixels, params))
}

/// An image (8-bit level units) with its labeled instance masks.
#[derive(Debug, Clone)]
pub struct AnnotatedImage {
    pub image: RgbRaster,
    pub instances: Vec<(RegionMask, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollectOptions {
    /// Bare-substrate pixels sampled per image as an explicit background class.
    pub background_per_image: usize,
    /// Keep background samples this many pixels away from any annotated instance.
    pub background_margin: usize,
    pub seed: u64,
}

impl Default for CollectOptions {
    fn default() -> Self {
        Self {
            background_per_image: 2000,
            background_margin: 2,
            seed: 0,
        }
    }
}

/// Contrast points of every annotated instance plus sampled background,
/// as a set whose classes map to the returned dataset labels.
pub fn collect_training_set(
    images: &[AnnotatedImage],
    class_names: &BTreeMap<u32, String>,
    opts: &CollectOptions,
) -> Result<(LabeledContrastSet, Vec<u32>)> {
    let mut per_image: Vec<Vec<(u32, Vec<[f64; 3]>)>> = Vec::with_capacity(images.len());
    let mut present = BTreeSet::new();
    for (index, ann) in images.iter().enumerate() {
        let wrap = |e| Error::Sample {
            index,
            source: Box::new(e),
        };
        let bg = estimate_background(&ann.image).map_err(wrap)?;
        let cimg = to_contrast(&ann.image, bg);
        let mut groups = Vec::new();
        let mut covered = BinaryMask::new(ann.image.width, ann.image.height);
        for (mask, label) in &ann.instances {
            if *label == BACKGROUND_LABEL {
                return Err(wrap(Error::InvalidInput(format!("label {BACKGROUND_LABEL} is reserved for background"))));
            }
            groups.push((*label, extract_region_contrasts(&cimg, mask).map_err(wrap)?));
            present.insert(*label);
            for (x, y) in mask.pixels() {
                covered.set(x, y, true);
            }
        }
        if opts.background_per_image > 0 {
            let exclusion = covered.dilate(opts.background_margin);
            let free: Vec<usize> = (0..cimg.data.len()).filter(|&i| !exclusion.bits[i]).collect();
            let take = opts.background_per_image.min(free.len());
            let mut rng = derived_rng(opts.seed, "background-samples", index as u64);
            let mut chosen: Vec<usize> = sample(&mut rng, free.len(), take).into_iter().map(|j| free[j]).collect();
            chosen.sort_unstable();
            if !chosen.is_empty() {
                groups.push((BACKGROUND_LABEL, chosen.iter().map(|&i| cimg.data[i]).collect()));
                present.insert(BACKGROUND_LABEL);
            }
        }
        per_image.push(groups);
    }
    if present.is_empty() {
        return Err(Error::InvalidInput("no training contrasts found".into()));
    }
    let labels: Vec<u32> = present.into_iter().collect();
    let index_of: BTreeMap<u32, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let names: Vec<String> = labels
        .iter()
        .map(|l| {
            if *l == BACKGROUND_LABEL {
                "background".to_string()
            } else {
                class_names.get(l).cloned().unwrap_or_else(|| format!("class {l}"))
            }
        })
        .collect();
    let mut points = Vec::new();
    let mut ids = Vec::new();
    for groups in per_image {
        for (label, pts) in groups {
            ids.extend(std::iter::repeat_n(index_of[&label], pts.len()));
            points.extend(pts.into_iter().flatten());
        }
    }
    Ok((LabeledContrastSet::new(3, points, ids, names)?, labels))
}
