use std::collections::BTreeMap;

use super::layout::LayerMap;
use crate::error::Result;
use crate::optics::OpticalSetup;
use crate::raster::RgbRaster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RenderStats {
    /// Number of spectral (thin-film) evaluations performed.
    pub optics_evaluations: usize,
    pub distinct_counts: usize,
}

/// Color every pixel from a per-image lookup table keyed by layer count, so
/// each distinct count costs exactly one thin-film evaluation.
pub fn render_scene(map: &LayerMap, substrate_nm: f64, setup: &OpticalSetup) -> Result<(RgbRaster, RenderStats)> {
    let mut lut: BTreeMap<u16, [f64; 3]> = BTreeMap::new();
    for count in map.distinct_counts() {
        lut.insert(count, setup.color(i64::from(count), substrate_nm)?.to_array());
    }
    let stats = RenderStats {
        optics_evaluations: lut.len(),
        distinct_counts: lut.len(),
    };
    let data = map.counts.iter().map(|c| lut[c]).collect();
    Ok((
        RgbRaster {
            width: map.width,
            height: map.height,
            data,
        },
        stats,
    ))
}
