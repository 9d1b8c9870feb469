use std::sync::Arc;

use super::color::{CameraResponse, ColorRenderer, RgbColor, WavelengthGrid};
use super::dispersion::{DispersionTable, SpectralCurve};
use super::tmm::LayerStack;
use crate::error::{Error, Result};

/// Data files shipped with the crate.
pub mod bundled {
    use super::*;

    const SI: &str = include_str!("../../data/si.nk");
    const SIO2: &str = include_str!("../../data/sio2.nk");
    const GRAPHENE: &str = include_str!("../../data/graphene.nk");
    const HBN: &str = include_str!("../../data/hbn.nk");
    const WSE2: &str = include_str!("../../data/wse2.nk");
    const CAMERA_R: &str = include_str!("../../data/camera_r.curve");
    const CAMERA_G: &str = include_str!("../../data/camera_g.curve");
    const CAMERA_B: &str = include_str!("../../data/camera_b.curve");
    const HALOGEN: &str = include_str!("../../data/halogen.curve");

    fn table(text: &str, name: &str) -> Arc<DispersionTable> {
        Arc::new(DispersionTable::parse(text, name).expect("bundled dispersion table"))
    }

    pub fn silicon() -> Arc<DispersionTable> {
        table(SI, "si.nk")
    }

    pub fn silicon_dioxide() -> Arc<DispersionTable> {
        table(SIO2, "sio2.nk")
    }

    /// Bundled dispersion for a material name (case-insensitive), if shipped.
    pub fn dispersion(material: &str) -> Option<Arc<DispersionTable>> {
        match material.to_ascii_lowercase().as_str() {
            "graphene" => Some(table(GRAPHENE, "graphene.nk")),
            "hbn" => Some(table(HBN, "hbn.nk")),
            "wse2" => Some(table(WSE2, "wse2.nk")),
            "si" => Some(silicon()),
            "sio2" => Some(silicon_dioxide()),
            _ => None,
        }
    }

    pub fn camera() -> CameraResponse {
        let curve = |text, name| SpectralCurve::parse(text, name).expect("bundled camera curve");
        CameraResponse {
            r: curve(CAMERA_R, "camera_r.curve"),
            g: curve(CAMERA_G, "camera_g.curve"),
            b: curve(CAMERA_B, "camera_b.curve"),
        }
    }

    /// 3200 K halogen lamp spectrum.
    pub fn halogen() -> SpectralCurve {
        SpectralCurve::parse(HALOGEN, "halogen.curve").expect("bundled light source")
    }
}

/// Per-layer thickness and annotated class count defaults by material.
pub fn material_defaults(material: &str) -> Option<(f64, u32)> {
    match material.to_ascii_lowercase().as_str() {
        "graphene" => Some((0.335, 4)),
        "hbn" => Some((0.333, 3)),
        "wse2" => Some((0.65, 3)),
        "ws2" => Some((0.65, 1)),
        "mose2" => Some((0.65, 2)),
        _ => None,
    }
}

/// Physical thickness of `layer_count` stacked layers.
pub fn layer_thickness(layer_count: i64, per_layer_nm: f64) -> Result<f64> {
    if layer_count < 0 {
        return Err(Error::InvalidInput(format!("negative layer count {layer_count}")));
    }
    if !(per_layer_nm.is_finite() && per_layer_nm > 0.0) {
        return Err(Error::Config(format!("per-layer thickness must be positive, got {per_layer_nm}")));
    }
    Ok(layer_count as f64 * per_layer_nm)
}

#[derive(Debug, Clone)]
pub struct MaterialSpec {
    pub name: String,
    pub dispersion: Arc<DispersionTable>,
    pub layer_thickness_nm: f64,
    /// Layer counts above this fall into the catch-all "thick" class.
    pub annotated_layers: u32,
}

impl MaterialSpec {
    /// Material with bundled dispersion and default thickness/class count.
    pub fn builtin(name: &str) -> Result<Self> {
        let dispersion = bundled::dispersion(name)
            .ok_or_else(|| Error::Config(format!("no bundled dispersion for material {name:?}")))?;
        let (layer_thickness_nm, annotated_layers) = material_defaults(name)
            .ok_or_else(|| Error::Config(format!("no default layer thickness for material {name:?}")))?;
        Ok(Self {
            name: name.to_string(),
            dispersion,
            layer_thickness_nm,
            annotated_layers,
        })
    }

    pub fn thickness_for(&self, layer_count: i64) -> Result<f64> {
        layer_thickness(layer_count, self.layer_thickness_nm)
    }
}

/// Everything needed to turn a layer count into a pixel color: flake material,
/// SiO2 on Si wafer, illuminant and camera.
#[derive(Debug, Clone)]
pub struct OpticalSetup {
    pub material: MaterialSpec,
    pub oxide: Arc<DispersionTable>,
    pub substrate: Arc<DispersionTable>,
    pub renderer: ColorRenderer,
}

impl OpticalSetup {
    pub fn new(
        material: MaterialSpec,
        oxide: Arc<DispersionTable>,
        substrate: Arc<DispersionTable>,
        source: &SpectralCurve,
        camera: &CameraResponse,
        grid: WavelengthGrid,
    ) -> Result<Self> {
        for table in [&material.dispersion, &oxide, &substrate] {
            let (lo, hi) = table.range_nm();
            let (glo, ghi) = (grid.wavelengths()[0], grid.wavelengths()[grid.len() - 1]);
            if glo < lo || ghi > hi {
                return Err(Error::Config(format!(
                    "{} covers {lo}..{hi} nm but the rendering grid spans {glo}..{ghi} nm",
                    table.material_name()
                )));
            }
        }
        let renderer = ColorRenderer::new(source, camera, grid)?;
        Ok(Self {
            material,
            oxide,
            substrate,
            renderer,
        })
    }

    /// Bundled Si/SiO2, halogen lamp, camera curves and the default visible grid.
    pub fn bundled(material: MaterialSpec) -> Result<Self> {
        Self::new(
            material,
            bundled::silicon_dioxide(),
            bundled::silicon(),
            &bundled::halogen(),
            &bundled::camera(),
            WavelengthGrid::visible(),
        )
    }

    /// `material(layers) / SiO2(oxide_nm) / Si`.
    pub fn stack(&self, layer_count: i64, oxide_nm: f64) -> Result<LayerStack> {
        let flake_nm = self.material.thickness_for(layer_count)?;
        let mut films = Vec::with_capacity(2);
        if layer_count > 0 {
            films.push(super::Film {
                dispersion: self.material.dispersion.clone(),
                thickness_nm: flake_nm,
            });
        }
        films.push(super::Film {
            dispersion: self.oxide.clone(),
            thickness_nm: oxide_nm,
        });
        LayerStack::new(1.0, films, self.substrate.clone())
    }

    pub fn color(&self, layer_count: i64, oxide_nm: f64) -> Result<RgbColor> {
        self.renderer.render_reference(&self.stack(layer_count, oxide_nm)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thickness_multiplies() {
        assert_eq!(layer_thickness(0, 0.335).unwrap(), 0.0);
        assert!((layer_thickness(3, 0.335).unwrap() - 1.005).abs() < 1e-12);
        assert!((layer_thickness(2, 0.333).unwrap() - 0.666).abs() < 1e-12);
        assert!(layer_thickness(-1, 0.335).is_err());
    }

    #[test]
    fn bundled_data_loads() {
        for m in ["graphene", "hbn", "wse2"] {
            let spec = MaterialSpec::builtin(m).unwrap();
            OpticalSetup::bundled(spec).unwrap();
        }
        assert!(MaterialSpec::builtin("unobtainium").is_err());
    }

    #[test]
    fn monolayer_graphene_is_darker_than_substrate() {
        let setup = OpticalSetup::bundled(MaterialSpec::builtin("graphene").unwrap()).unwrap();
        let bare = setup.color(0, 90.0).unwrap();
        let mono = setup.color(1, 90.0).unwrap();
        assert!(mono.g < bare.g);
    }
}
