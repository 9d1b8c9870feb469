//! Synthetic scene composition, rendering and ground truth.

mod config;
mod dataset;
mod instances;
mod layout;
mod postprocess;
mod render;
mod simplex;

pub use config::{Interval, PostprocessConfig, SceneConfig};
pub use dataset::{SceneGenerator, SyntheticSample};
pub use instances::{derive_instances, ClassScheme, SceneInstance};
pub use layout::{sample_scene, transform_mask, LayerMap, Placement, PlacementLog};
pub use postprocess::{
    apply_gaussian_noise, apply_residue, apply_shadow, apply_vignette, postprocess, PostprocessParams, Shadow,
};
pub use render::{render_scene, RenderStats};
pub use simplex::{simplex_noise, SimplexNoise};
