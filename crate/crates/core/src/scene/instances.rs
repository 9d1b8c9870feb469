use serde::{Deserialize, Serialize};

use super::layout::LayerMap;
use crate::raster::RegionMask;
use crate::shapes::{label_regions, Connectivity};

/// One constant-thickness region of a synthetic scene.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneInstance {
    pub mask: RegionMask,
    pub layer_count: u32,
    pub class_label: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassScheme {
    pub annotated_layers: u32,
}

impl ClassScheme {
    /// Layer count, or the catch-all label `annotated_layers + 1`.
    pub fn class_for(&self, layer_count: u32) -> u32 {
        layer_count.min(self.annotated_layers + 1)
    }

    pub fn catch_all(&self) -> u32 {
        self.annotated_layers + 1
    }
}

/// 8-connected components of each non-zero level set of the layer map.
pub fn derive_instances(map: &LayerMap, annotated_layers: u32) -> Vec<SceneInstance> {
    let scheme = ClassScheme { annotated_layers };
    let labeling = label_regions(map.width, map.height, &map.counts, |c| c > 0, Connectivity::Eight);
    labeling
        .components
        .iter()
        .map(|c| {
            let (x0, y0, _, _) = c.bbox;
            let layer_count = u32::from(map.get(
                // any pixel of the component carries its count; find the first
                (x0..c.bbox.2)
                    .find(|&x| labeling.label_at(x, y0) == c.label)
                    .expect("component touches its bbox top row"),
                y0,
            ));
            SceneInstance {
                mask: RegionMask {
                    canvas_width: map.width,
                    canvas_height: map.height,
                    x0,
                    y0,
                    crop: labeling.cropped_mask_of(c.label),
                },
                layer_count,
                class_label: scheme.class_for(layer_count),
            }
        })
        .collect()
}
