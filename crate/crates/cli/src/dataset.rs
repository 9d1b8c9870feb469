//! Annotation files on disk: loading images with their masks, conversion for
//! evaluation, and validated import into a manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use flakelab::annotations::{AnnotationFile, ClassName, ImageRecord, ANNOTATION_FORMAT};
use flakelab::detector::AnnotatedImage;
use flakelab::eval::{EvalInstance, ImageInstances};
use flakelab::raster::{RegionMask, RgbRaster};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FORMAT: &str = "flakelab-manifest";
const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

pub fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Image files under `inputs`: files are taken as given, directories are
/// searched recursively and their contents sorted.
pub fn collect_images(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
            .with_context(|| format!("{}", dir.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()
            .with_context(|| format!("{}", dir.display()))?;
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(&p, out)?;
            } else if is_image(&p) {
                out.push(p);
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            walk(input, &mut out)?;
        } else if input.exists() {
            out.push(input.clone());
        } else {
            bail!("{}: no such file or directory", input.display());
        }
    }
    Ok(out)
}

/// An annotation file and the directory its image paths are relative to.
pub struct Dataset {
    pub file: AnnotationFile,
    pub root: PathBuf,
}

impl Dataset {
    pub fn load(path: &Path) -> Result<Self> {
        let file = AnnotationFile::load(path)?;
        file.validate().with_context(|| format!("{}", path.display()))?;
        Ok(Self {
            file,
            root: path.parent().unwrap_or(Path::new(".")).to_path_buf(),
        })
    }

    pub fn image_path(&self, record: &ImageRecord) -> PathBuf {
        self.root.join(&record.file)
    }

    pub fn class_names(&self) -> BTreeMap<u32, String> {
        self.file.class_names.iter().map(|c| (c.label, c.name.clone())).collect()
    }
}

pub fn load_rgb8(path: &Path) -> Result<image::RgbImage> {
    Ok(image::open(path)
        .with_context(|| format!("{}", path.display()))?
        .to_rgb8())
}

pub fn record_masks(record: &ImageRecord) -> Result<Vec<(RegionMask, u32, Option<f64>)>> {
    record
        .instances
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            let mask = inst
                .mask
                .decode_region()
                .map_err(|reason| anyhow!("{}: instance {i}: {reason}", record.file))?;
            Ok((mask, inst.class_label, inst.score))
        })
        .collect()
}

/// Decode one record's image (8-bit levels) and masks for training.
pub fn annotated_image(dataset: &Dataset, record: &ImageRecord) -> Result<AnnotatedImage> {
    let path = dataset.image_path(record);
    let img = load_rgb8(&path)?;
    if (img.width() as usize, img.height() as usize) != (record.width, record.height) {
        bail!(
            "{}: image is {}x{} but annotations say {}x{}",
            path.display(),
            img.width(),
            img.height(),
            record.width,
            record.height
        );
    }
    Ok(AnnotatedImage {
        image: RgbRaster::from_rgb8(&img),
        instances: record_masks(record)?
            .into_iter()
            .map(|(m, label, _)| (m, label))
            .collect(),
    })
}

/// Evaluation view of an annotation file. Instances without a score count
/// as fully confident.
pub fn eval_instances(file: &AnnotationFile) -> Result<Vec<ImageInstances>> {
    file.images
        .iter()
        .map(|record| {
            Ok(ImageInstances {
                id: record.id.clone(),
                instances: record_masks(record)?
                    .into_iter()
                    .map(|(mask, class_label, score)| EvalInstance {
                        mask,
                        class_label,
                        score: score.unwrap_or(1.0),
                    })
                    .collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassCount {
    pub label: u32,
    pub name: String,
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestImage {
    pub id: String,
    pub file: String,
    pub width: usize,
    pub height: usize,
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub dataset: String,
    pub split: String,
    /// Annotation file, relative to the imported directory.
    pub annotations: String,
    pub class_names: Vec<ClassName>,
    pub class_counts: Vec<ClassCount>,
    pub image_count: usize,
    pub instance_count: usize,
    /// Image files in the directory that no annotation refers to.
    pub unannotated_images: Vec<String>,
    pub images: Vec<ManifestImage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

fn find_annotation_file(dir: &Path) -> Result<PathBuf> {
    let preferred = dir.join("annotations.json");
    if preferred.is_file() {
        return Ok(preferred);
    }
    let mut candidates = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("{}", dir.display()))? {
        let p = entry?.path();
        if p.extension().is_some_and(|e| e == "json") {
            let text = std::fs::read_to_string(&p).with_context(|| format!("{}", p.display()))?;
            if text.contains(ANNOTATION_FORMAT) {
                candidates.push(p);
            }
        }
    }
    candidates.sort();
    match candidates.len() {
        0 => bail!("{}: no annotation file found", dir.display()),
        1 => Ok(candidates.remove(0)),
        _ => bail!(
            "{}: several annotation files found; pass --annotations",
            dir.display()
        ),
    }
}

/// Validate a directory of images plus one annotation file and summarize it.
/// Any problem is reported with the name of the offending image file.
pub fn import_dataset(dir: &Path, annotations: Option<&Path>, split: &str) -> Result<DatasetManifest> {
    if !dir.is_dir() {
        bail!("{}: not a directory", dir.display());
    }
    let images = collect_images(&[dir.to_path_buf()])?;
    if images.is_empty() {
        bail!("{}: no images found", dir.display());
    }
    let ann_path = match annotations {
        Some(p) => p.to_path_buf(),
        None => find_annotation_file(dir)?,
    };
    let file = AnnotationFile::load(&ann_path)?;
    let root = ann_path.parent().unwrap_or(Path::new("."));
    let labels: BTreeMap<u32, &str> = file.class_names.iter().map(|c| (c.label, c.name.as_str())).collect();
    let mut counts: BTreeMap<u32, usize> = labels.keys().map(|&l| (l, 0)).collect();
    let mut entries = Vec::with_capacity(file.images.len());
    let mut referenced = std::collections::BTreeSet::new();
    for record in &file.images {
        let path = root.join(&record.file);
        if !path.is_file() {
            bail!("{}: missing image", record.file);
        }
        let (w, h) = image::image_dimensions(&path).map_err(|e| anyhow!("{}: {e}", record.file))?;
        if (w as usize, h as usize) != (record.width, record.height) {
            bail!(
                "{}: image is {w}x{h} but annotations say {}x{}",
                record.file,
                record.width,
                record.height
            );
        }
        for (i, inst) in record.instances.iter().enumerate() {
            if !labels.contains_key(&inst.class_label) {
                bail!("{}: instance {i}: unknown class label {}", record.file, inst.class_label);
            }
            if (inst.mask.width(), inst.mask.height()) != (record.width, record.height) {
                bail!(
                    "{}: instance {i}: mask is {}x{} but image is {}x{}",
                    record.file,
                    inst.mask.width(),
                    inst.mask.height(),
                    record.width,
                    record.height
                );
            }
            let region = inst
                .mask
                .decode_region()
                .map_err(|reason| anyhow!("{}: instance {i}: {reason}", record.file))?;
            if region.area() != inst.area {
                bail!(
                    "{}: instance {i}: area {} does not match mask area {}",
                    record.file,
                    inst.area,
                    region.area()
                );
            }
            *counts.entry(inst.class_label).or_default() += 1;
        }
        referenced.insert(std::fs::canonicalize(&path).unwrap_or(path));
        entries.push(ManifestImage {
            id: record.id.clone(),
            file: record.file.clone(),
            width: record.width,
            height: record.height,
            instances: record.instances.len(),
        });
    }
    let unannotated = images
        .iter()
        .filter(|p| !referenced.contains(&std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())))
        .map(|p| p.strip_prefix(dir).unwrap_or(p).display().to_string())
        .collect();
    Ok(DatasetManifest {
        format: MANIFEST_FORMAT.into(),
        version: 1,
        dataset: file.dataset.clone(),
        split: split.to_string(),
        annotations: ann_path.strip_prefix(dir).unwrap_or(&ann_path).display().to_string(),
        class_counts: counts
            .iter()
            .map(|(&label, &instances)| ClassCount {
                label,
                name: labels.get(&label).copied().unwrap_or_default().to_string(),
                instances,
            })
            .collect(),
        class_names: file.class_names.clone(),
        image_count: entries.len(),
        instance_count: entries.iter().map(|e| e.instances).sum(),
        unannotated_images: unannotated,
        images: entries,
        config: file.config.clone(),
    })
}
