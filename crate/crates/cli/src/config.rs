//! Pipeline configuration file (TOML).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use flakelab::detector::{CollectOptions, DetectorParams};
use flakelab::eval::MatchConfig;
use flakelab::mixture::TrainerConfig;
use flakelab::optics::{
    bundled, material_defaults, CameraResponse, DispersionTable, MaterialSpec, OpticalSetup, SpectralCurve,
    WavelengthGrid,
};
use flakelab::scene::SceneConfig;
use flakelab::shapes::{Band, Connectivity, FilterCriteria, MiningOptions};
use serde::{Deserialize, Serialize};

const BUILTIN: &str = "builtin:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialConfig {
    pub name: String,
    /// Path to a `wavelength n k` table, or `builtin:<material>`.
    pub dispersion: Option<String>,
    pub layer_thickness_nm: Option<f64>,
    pub annotated_layers: Option<u32>,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self {
            name: "graphene".into(),
            dispersion: None,
            layer_thickness_nm: None,
            annotated_layers: None,
        }
    }
}

/// Replacement optical data files; bundled data is used for anything unset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticsConfig {
    pub oxide: Option<PathBuf>,
    pub substrate: Option<PathBuf>,
    pub illuminant: Option<PathBuf>,
    /// Red, green and blue response curves.
    pub camera: Option<[PathBuf; 3]>,
    /// `[start, end, step]` in nm.
    pub wavelength_grid: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MiningConfig {
    /// Explicit `[lo, hi)` luminance bands; evenly spread bands otherwise.
    pub bands: Option<Vec<[u16; 2]>>,
    pub band_count: usize,
    pub connectivity: Connectivity,
    pub min_area: usize,
    pub max_area_fraction: f64,
    pub min_solidity: f64,
    pub max_border_fraction: f64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        let opts = MiningOptions::default();
        Self {
            bands: None,
            band_count: opts.band_count,
            connectivity: opts.connectivity,
            min_area: opts.criteria.min_area,
            max_area_fraction: opts.criteria.max_area_fraction,
            min_solidity: opts.criteria.min_solidity,
            max_border_fraction: opts.criteria.max_border_fraction,
        }
    }
}

impl MiningConfig {
    pub fn options(&self) -> MiningOptions {
        MiningOptions {
            bands: self
                .bands
                .as_ref()
                .map(|b| b.iter().map(|&[lo, hi]| Band::new(lo, hi)).collect()),
            band_count: self.band_count,
            connectivity: self.connectivity,
            criteria: FilterCriteria {
                min_area: self.min_area,
                max_area_fraction: self.max_area_fraction,
                min_solidity: self.min_solidity,
                max_border_fraction: self.max_border_fraction,
            },
        }
    }
}

/// Default inputs for subcommands; command-line arguments take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub shapes: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Master seed; when set it replaces every section seed.
    pub seed: Option<u64>,
    pub material: MaterialConfig,
    pub optics: OpticsConfig,
    pub mining: MiningConfig,
    pub scene: SceneConfig,
    pub collect: CollectOptions,
    pub train: TrainerConfig,
    pub detector: DetectorParams,
    pub eval: MatchConfig,
    pub paths: PathsConfig,
}

/// Byte offset to 1-based line number.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl PipelineConfig {
    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
            anyhow!("config {}: line {line}: {}", source.display(), e.message().trim())
        })?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let inner = e.inner();
            let line = inner.span().map(|s| line_of(text, s.start)).unwrap_or(0);
            anyhow!(
                "config {}: key `{key}` (line {line}): {}",
                source.display(),
                inner.message().trim()
            )
        })?;
        Ok(cfg)
    }

    /// Read a config file and resolve its relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("config {}", path.display()))?;
        let mut cfg = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        cfg.check_files().with_context(|| format!("config {}", path.display()))?;
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(d) = &mut self.material.dispersion {
            if !d.starts_with(BUILTIN) && Path::new(d).is_relative() {
                *d = base.join(&*d).display().to_string();
            }
        }
        let o = &mut self.optics;
        for p in [&mut o.oxide, &mut o.substrate, &mut o.illuminant].into_iter().flatten() {
            fix(p);
        }
        if let Some(cam) = &mut o.camera {
            cam.iter_mut().for_each(fix);
        }
        for p in [&mut self.paths.shapes, &mut self.paths.dataset, &mut self.paths.model].into_iter().flatten() {
            fix(p);
        }
    }

    fn check_files(&self) -> Result<()> {
        let mut files: Vec<(&str, &Path)> = Vec::new();
        if let Some(d) = &self.material.dispersion {
            if !d.starts_with(BUILTIN) {
                files.push(("material.dispersion", Path::new(d)));
            }
        }
        let o = &self.optics;
        for (key, p) in [("optics.oxide", &o.oxide), ("optics.substrate", &o.substrate), ("optics.illuminant", &o.illuminant)] {
            if let Some(p) = p {
                files.push((key, p));
            }
        }
        if let Some(cam) = &o.camera {
            files.extend(cam.iter().map(|p| ("optics.camera", p.as_path())));
        }
        for (key, p) in [("paths.shapes", &self.paths.shapes), ("paths.dataset", &self.paths.dataset), ("paths.model", &self.paths.model)] {
            if let Some(p) = p {
                files.push((key, p));
            }
        }
        for (key, p) in files {
            if !p.exists() {
                bail!("key `{key}`: {} does not exist", p.display());
            }
        }
        Ok(())
    }

    /// Apply the master seed and keep the scene material in step with
    /// `material.name`.
    pub fn resolve(&mut self, seed_override: Option<u64>) -> Result<()> {
        if let Some(seed) = seed_override.or(self.seed) {
            self.seed = Some(seed);
            self.scene.seed = seed;
            self.collect.seed = seed;
            self.train.train.seed = seed;
        }
        let default_material = SceneConfig::default().material;
        if !self.scene.material.eq_ignore_ascii_case(&self.material.name) {
            if self.scene.material != default_material {
                bail!(
                    "config: key `scene.material` ({:?}) contradicts `material.name` ({:?})",
                    self.scene.material,
                    self.material.name
                );
            }
            self.scene.material = self.material.name.clone();
        }
        if self.scene.annotated_layers.is_none() {
            self.scene.annotated_layers = self.material.annotated_layers;
        }
        self.scene.validate()?;
        self.detector.validate()?;
        self.eval.validate()?;
        Ok(())
    }

    pub fn material_spec(&self) -> Result<MaterialSpec> {
        let m = &self.material;
        let dispersion = match m.dispersion.as_deref() {
            None => bundled::dispersion(&m.name),
            Some(d) => match d.strip_prefix(BUILTIN) {
                Some(name) => bundled::dispersion(name),
                None => Some(Arc::new(DispersionTable::from_file(Path::new(d))?)),
            },
        }
        .ok_or_else(|| anyhow!("no bundled dispersion for material {:?}; set material.dispersion", m.name))?;
        let defaults = material_defaults(&m.name);
        let layer_thickness_nm = m
            .layer_thickness_nm
            .or(defaults.map(|d| d.0))
            .ok_or_else(|| anyhow!("material {:?} needs material.layer_thickness_nm", m.name))?;
        let annotated_layers = m
            .annotated_layers
            .or(defaults.map(|d| d.1))
            .ok_or_else(|| anyhow!("material {:?} needs material.annotated_layers", m.name))?;
        Ok(MaterialSpec {
            name: m.name.clone(),
            dispersion,
            layer_thickness_nm,
            annotated_layers,
        })
    }

    pub fn optical_setup(&self) -> Result<OpticalSetup> {
        let o = &self.optics;
        let table = |p: &Option<PathBuf>, fallback: fn() -> Arc<DispersionTable>| -> Result<Arc<DispersionTable>> {
            Ok(match p {
                Some(p) => Arc::new(DispersionTable::from_file(p)?),
                None => fallback(),
            })
        };
        let illuminant = match &o.illuminant {
            Some(p) => SpectralCurve::from_file(p)?,
            None => bundled::halogen(),
        };
        let camera = match &o.camera {
            Some([r, g, b]) => CameraResponse {
                r: SpectralCurve::from_file(r)?,
                g: SpectralCurve::from_file(g)?,
                b: SpectralCurve::from_file(b)?,
            },
            None => bundled::camera(),
        };
        let grid = match o.wavelength_grid {
            Some([start, end, step]) => WavelengthGrid::uniform(start, end, step)?,
            None => WavelengthGrid::visible(),
        };
        Ok(OpticalSetup::new(
            self.material_spec()?,
            table(&o.oxide, bundled::silicon_dioxide)?,
            table(&o.substrate, bundled::silicon)?,
            &illuminant,
            &camera,
            grid,
        )?)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
