//! Thin-film reflectance and color rendering.

mod color;
mod dispersion;
mod material;
mod tmm;

pub use color::{render_color, CameraResponse, ColorRenderer, RgbColor, WavelengthGrid};
pub use dispersion::{DispersionTable, NkSample, SpectralCurve};
pub use material::{bundled, layer_thickness, material_defaults, MaterialSpec, OpticalSetup};
pub use tmm::{reflectance, Film, LayerStack};
