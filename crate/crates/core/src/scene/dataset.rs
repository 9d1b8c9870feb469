use std::path::Path;

use rayon::prelude::*;

use super::config::{sample_interval, SceneConfig};
use super::instances::{derive_instances, SceneInstance};
use super::layout::{sample_scene, LayerMap, PlacementLog};
use super::postprocess::{postprocess, PostprocessParams};
use super::render::{render_scene, RenderStats};
use crate::annotations::{layer_class_names, AnnotationFile, ImageRecord, InstanceRecord, RleMask, SampleMetadata};
use crate::error::{Error, Result};
use crate::optics::OpticalSetup;
use crate::raster::RgbRaster;
use crate::rng::{derive_seed, rng_from_seed};
use crate::shapes::ShapeLibrary;

/// One generated image with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticSample {
    /// Post-processed image, channels in `[0, 1]`.
    pub image: RgbRaster,
    pub instances: Vec<SceneInstance>,
    pub metadata: SampleMetadata,
    pub layer_map: LayerMap,
    pub placements: PlacementLog,
    /// Bare-substrate color after exposure, before post-processing.
    pub substrate_color: [f64; 3],
    /// Camera gain applied to the rendered reflectances.
    pub exposure_gain: f64,
    /// Counts the bare-substrate reference evaluation as well.
    pub render_stats: RenderStats,
    pub postprocess: PostprocessParams,
}

pub struct SceneGenerator<'a> {
    config: SceneConfig,
    library: &'a ShapeLibrary,
    setup: &'a OpticalSetup,
    annotated_layers: u32,
}

impl<'a> SceneGenerator<'a> {
    pub fn new(config: SceneConfig, library: &'a ShapeLibrary, setup: &'a OpticalSetup) -> Result<Self> {
        config.validate()?;
        if library.is_empty() {
            return Err(Error::InvalidInput("shape library is empty".into()));
        }
        if !config.material.eq_ignore_ascii_case(&setup.material.name) {
            return Err(Error::Config(format!(
                "scene material {:?} does not match optical setup material {:?}",
                config.material, setup.material.name
            )));
        }
        let annotated_layers = config.annotated_layers.unwrap_or(setup.material.annotated_layers);
        Ok(Self {
            config,
            library,
            setup,
            annotated_layers,
        })
    }

    pub fn config(&self) -> &SceneConfig {
        &self.config
    }

    pub fn annotated_layers(&self) -> u32 {
        self.annotated_layers
    }

    /// Image `index` depends only on the master seed and the index.
    pub fn generate_sample(&self, index: usize) -> Result<SyntheticSample> {
        self.sample_inner(index).map_err(|e| Error::Sample {
            index,
            source: Box::new(e),
        })
    }

    fn sample_inner(&self, index: usize) -> Result<SyntheticSample> {
        let seed = derive_seed(self.config.seed, "image", index as u64);
        let mut rng = rng_from_seed(seed);
        let (layer_map, placements) = sample_scene(&self.config, self.library, &mut rng)?;
        let substrate_nm = sample_interval(&mut rng, self.config.substrate_nm);
        let (mut image, mut render_stats) = render_scene(&layer_map, substrate_nm, self.setup)?;
        let mut substrate_color = self.setup.color(0, substrate_nm)?.to_array();
        render_stats.optics_evaluations += 1;
        let gain = match self.config.exposure_target {
            Some(target) => target / (substrate_color.iter().sum::<f64>() / 3.0),
            None => 1.0,
        };
        if gain != 1.0 {
            substrate_color = substrate_color.map(|v| v * gain);
            for p in image.data.iter_mut() {
                *p = p.map(|v| v * gain);
            }
        }
        let postprocess = postprocess(&mut image, &mut rng, &self.config.postprocess);
        let instances = derive_instances(&layer_map, self.annotated_layers);
        Ok(SyntheticSample {
            image,
            instances,
            metadata: SampleMetadata {
                seed,
                substrate_thickness_nm: substrate_nm,
                material: self.setup.material.name.clone(),
                optics_evaluations: Some(render_stats.optics_evaluations),
                distinct_layer_counts: Some(render_stats.distinct_counts),
            },
            layer_map,
            placements,
            substrate_color,
            exposure_gain: gain,
            render_stats,
            postprocess,
        })
    }

    fn record(&self, index: usize, sample: &SyntheticSample, file: String) -> ImageRecord {
        let instances = sample
            .instances
            .iter()
            .filter(|inst| inst.mask.area() >= self.config.min_instance_area)
            .map(|inst| InstanceRecord {
                class_label: inst.class_label,
                layer_count: Some(inst.layer_count),
                area: inst.mask.area(),
                score: None,
                mask: RleMask::encode_region(&inst.mask),
            })
            .collect();
        ImageRecord {
            id: format!("img_{index:06}"),
            file,
            width: sample.image.width,
            height: sample.image.height,
            metadata: Some(sample.metadata.clone()),
            instances,
        }
    }

    /// Write `count` PNG images under `out_dir/images/` and return their
    /// annotations; the caller decides where to store them.
    pub fn generate_dataset(&self, count: usize, out_dir: &Path) -> Result<AnnotationFile> {
        let mut file = AnnotationFile::new(
            format!("synthetic-{}", self.setup.material.name),
            layer_class_names(self.annotated_layers),
        );
        file.config = Some(serde_json::to_value(&self.config).map_err(|e| Error::json("scene config", e))?);
        if count == 0 {
            return Ok(file);
        }
        let image_dir = out_dir.join("images");
        std::fs::create_dir_all(&image_dir).map_err(|e| Error::io(&image_dir, e))?;
        file.images = (0..count)
            .into_par_iter()
            .map(|index| {
                let sample = self.generate_sample(index)?;
                let name = format!("img_{index:06}.png");
                let path = image_dir.join(&name);
                sample
                    .image
                    .to_rgb8()
                    .save_with_format(&path, image::ImageFormat::Png)
                    .map_err(|e| Error::Sample {
                        index,
                        source: Box::new(Error::Image { path: path.clone(), source: e }),
                    })?;
                Ok(self.record(index, &sample, format!("images/{name}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(file)
    }
}
