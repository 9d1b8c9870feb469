//! Run-length mask encoding and the JSON annotation/detection file format.
//!
//! Masks are encoded row-major over the full image as alternating run lengths
//! of unset and set pixels, always starting with an unset run (possibly 0).
//! Detections use the same file layout with a `score` on every instance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, RegionMask};

pub const ANNOTATION_FORMAT: &str = "flakelab-annotations";
pub const ANNOTATION_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RleMask {
    /// `[height, width]`.
    pub size: [usize; 2],
    pub counts: Vec<u64>,
}

impl RleMask {
    pub fn encode_region(mask: &RegionMask) -> Self {
        let (w, h) = mask.dims();
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u64;
        let push = |value: bool, len: u64, counts: &mut Vec<u64>, current: &mut bool, run: &mut u64| {
            if len == 0 {
                return;
            }
            if value != *current {
                counts.push(*run);
                *current = value;
                *run = 0;
            }
            *run += len;
        };
        let (cx0, cy0) = (mask.x0, mask.y0);
        let (cw, ch) = (mask.crop.width, mask.crop.height);
        if cw == 0 || ch == 0 {
            return Self {
                size: [h, w],
                counts: vec![(w * h) as u64],
            };
        }
        push(false, (cy0 * w) as u64, &mut counts, &mut current, &mut run);
        for y in 0..ch {
            push(false, cx0 as u64, &mut counts, &mut current, &mut run);
            for x in 0..cw {
                push(mask.crop.get(x, y), 1, &mut counts, &mut current, &mut run);
            }
            push(false, (w - cx0 - cw) as u64, &mut counts, &mut current, &mut run);
        }
        push(false, ((h - cy0 - ch) * w) as u64, &mut counts, &mut current, &mut run);
        counts.push(run);
        Self { size: [h, w], counts }
    }

    pub fn encode(mask: &BinaryMask) -> Self {
        Self::encode_region(&RegionMask::from_full(mask))
    }

    pub fn width(&self) -> usize {
        self.size[1]
    }

    pub fn height(&self) -> usize {
        self.size[0]
    }

    /// Decode, verifying that the runs cover exactly `height * width` pixels.
    pub fn decode_region(&self) -> std::result::Result<RegionMask, String> {
        let (h, w) = (self.size[0], self.size[1]);
        let total: u64 = self.counts.iter().sum();
        if total != (w * h) as u64 {
            return Err(format!("run lengths sum to {total}, expected {}x{} = {}", h, w, w * h));
        }
        let mut set_runs = Vec::new();
        let mut pos = 0u64;
        for (i, &len) in self.counts.iter().enumerate() {
            if i % 2 == 1 && len > 0 {
                set_runs.push((pos as usize, len as usize));
            }
            pos += len;
        }
        if set_runs.is_empty() {
            return Ok(RegionMask::empty(w, h));
        }
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for &(start, len) in &set_runs {
            let (first_y, last_y) = (start / w, (start + len - 1) / w);
            y0 = y0.min(first_y);
            y1 = y1.max(last_y + 1);
            if first_y == last_y {
                x0 = x0.min(start % w);
                x1 = x1.max((start + len - 1) % w + 1);
            } else {
                x0 = 0;
                x1 = w;
            }
        }
        let mut crop = BinaryMask::new(x1 - x0, y1 - y0);
        for (start, len) in set_runs {
            for p in start..start + len {
                crop.set(p % w - x0, p / w - y0, true);
            }
        }
        Ok(RegionMask {
            canvas_width: w,
            canvas_height: h,
            x0,
            y0,
            crop,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassName {
    pub label: u32,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleMetadata {
    pub seed: u64,
    pub substrate_thickness_nm: f64,
    pub material: String,
    /// Thin-film evaluations spent rendering the image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optics_evaluations: Option<usize>,
    /// Distinct layer counts in the image, including bare substrate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distinct_layer_counts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceRecord {
    pub class_label: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_count: Option<u32>,
    pub area: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    pub mask: RleMask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRecord {
    pub id: String,
    pub file: String,
    pub width: usize,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<SampleMetadata>,
    pub instances: Vec<InstanceRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationFile {
    pub format: String,
    pub version: u32,
    pub dataset: String,
    pub class_names: Vec<ClassName>,
    /// Configuration the file was produced with, echoed verbatim.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    pub images: Vec<ImageRecord>,
}

impl AnnotationFile {
    pub fn new(dataset: impl Into<String>, class_names: Vec<ClassName>) -> Self {
        Self {
            format: ANNOTATION_FORMAT.into(),
            version: ANNOTATION_VERSION,
            dataset: dataset.into(),
            class_names,
            config: None,
            images: Vec::new(),
        }
    }

    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text).map_err(|e| Error::json(context, e))?;
        if file.format != ANNOTATION_FORMAT || file.version != ANNOTATION_VERSION {
            return Err(Error::InvalidInput(format!(
                "{context}: unsupported annotation format {:?} version {}",
                file.format, file.version
            )));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("annotations", e))
    }

    /// Check every mask against its image's dimensions; the error names the
    /// offending image file.
    pub fn validate(&self) -> Result<()> {
        for img in &self.images {
            for (i, inst) in img.instances.iter().enumerate() {
                let bad = |reason: String| {
                    Error::InvalidInput(format!("{}: instance {i}: {reason}", img.file))
                };
                if inst.mask.width() != img.width || inst.mask.height() != img.height {
                    return Err(bad(format!(
                        "mask size {}x{} does not match image {}x{}",
                        inst.mask.width(),
                        inst.mask.height(),
                        img.width,
                        img.height
                    )));
                }
                let region = inst.mask.decode_region().map_err(bad)?;
                if region.area() != inst.area {
                    return Err(bad(format!("area {} does not match mask area {}", inst.area, region.area())));
                }
            }
        }
        Ok(())
    }
}

/// `1 layer`, `2 layers`, ..., plus the catch-all `thick` class.
pub fn layer_class_names(annotated_layers: u32) -> Vec<ClassName> {
    let mut names: Vec<ClassName> = (1..=annotated_layers)
        .map(|l| ClassName {
            label: l,
            name: if l == 1 { "1 layer".into() } else { format!("{l} layers") },
        })
        .collect();
    names.push(ClassName {
        label: annotated_layers + 1,
        name: "thick".into(),
    });
    names
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #[test]
        fn rle_round_trip(w in 1usize..24, h in 1usize..24, bits in proptest::collection::vec(any::<bool>(), 576)) {
            let mask = BinaryMask::from_fn(w, h, |x, y| bits[y * 24 + x]);
            let rle = RleMask::encode(&mask);
            prop_assert_eq!(rle.counts.iter().sum::<u64>(), (w * h) as u64);
            prop_assert!(rle.counts.iter().skip(1).all(|&c| c > 0));
            prop_assert_eq!(rle.decode_region().unwrap().to_full(), mask);
        }
    }

    #[test]
    fn encoding_starts_with_unset_run() {
        let mask = BinaryMask::from_fn(3, 2, |x, y| x == 0 && y == 0);
        assert_eq!(RleMask::encode(&mask).counts, vec![0, 1, 5]);
        let empty = BinaryMask::new(3, 2);
        assert_eq!(RleMask::encode(&empty).counts, vec![6]);
        let full = BinaryMask::from_fn(3, 2, |_, _| true);
        assert_eq!(RleMask::encode(&full).counts, vec![0, 6]);
    }

    #[test]
    fn bad_run_sum_rejected() {
        let rle = RleMask { size: [2, 3], counts: vec![1, 2] };
        assert!(rle.decode_region().is_err());
    }
}
