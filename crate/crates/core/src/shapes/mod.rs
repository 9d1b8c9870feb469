//! Flake silhouette mining: grayscale, stepped brightness thresholds,
//! connected components and a geometric quality filter.

mod components;
mod filter;
mod library;
mod threshold;

use std::path::Path;

use rayon::prelude::*;

pub use components::{connected_components, label_regions, Component, Connectivity, Labeling};
pub use filter::{filter_shapes, shape_stats, FilterCriteria, ShapeStats};
pub use library::{decode_pbm, encode_pbm, FlakeShape, LibraryManifest, ShapeEntry, ShapeLibrary};
pub use threshold::{default_bands, stepped_threshold, to_grayscale, validate_bands, Band};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MiningOptions {
    /// Explicit bands; `None` uses [`default_bands`] per image.
    pub bands: Option<Vec<Band>>,
    pub band_count: usize,
    pub connectivity: Connectivity,
    pub criteria: FilterCriteria,
}

impl Default for MiningOptions {
    fn default() -> Self {
        Self {
            bands: None,
            band_count: 8,
            connectivity: Connectivity::Eight,
            criteria: FilterCriteria::default(),
        }
    }
}

/// Mine the shapes of one image.
pub fn mine_image(img: &image::RgbImage, source_id: &str, opts: &MiningOptions) -> Result<Vec<FlakeShape>> {
    let gray = to_grayscale(img)?;
    let bands = match &opts.bands {
        Some(b) => b.clone(),
        None => default_bands(&gray, opts.band_count),
    };
    let masks = stepped_threshold(&gray, &bands)?;
    let mut shapes = Vec::new();
    for (band, mask) in bands.iter().zip(&masks) {
        let labeling = connected_components(mask, opts.connectivity);
        let tag = format!("{source_id}#[{},{})", band.lo, band.hi);
        shapes.extend(filter_shapes(&labeling, &opts.criteria, &tag));
    }
    Ok(shapes)
}

/// Mine a set of image files in parallel and merge the results in input order.
pub fn mine_files(paths: &[impl AsRef<Path> + Sync], opts: &MiningOptions) -> Result<ShapeLibrary> {
    let per_image: Vec<Result<Vec<FlakeShape>>> = paths
        .par_iter()
        .map(|p| {
            let p = p.as_ref();
            let img = image::open(p)
                .map_err(|source| Error::Image {
                    path: p.to_path_buf(),
                    source,
                })?
                .to_rgb8();
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            mine_image(&img, &name, opts)
        })
        .collect();
    let mut shapes = Vec::new();
    for r in per_image {
        shapes.extend(r?);
    }
    Ok(ShapeLibrary {
        shapes,
        criteria: Some(opts.criteria),
        sources: paths
            .iter()
            .map(|p| p.as_ref().display().to_string())
            .collect(),
    })
}
