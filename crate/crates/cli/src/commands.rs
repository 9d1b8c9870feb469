use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use flakelab::annotations::{AnnotationFile, ClassName, ImageRecord, InstanceRecord, RleMask};
use flakelab::detector::{collect_training_set, detect, AnnotatedImage, BACKGROUND_LABEL};
use flakelab::eval::ap50;
use flakelab::mixture::{train_classifier, ClassifierModel};
use flakelab::raster::RgbRaster;
use flakelab::scene::SceneGenerator;
use flakelab::shapes::{mine_files, ShapeLibrary};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::dataset::{annotated_image, collect_images, eval_instances, import_dataset, load_rgb8, Dataset};
use crate::output::{write_json, StagedDir};
use crate::{Cli, Command};

fn required<'a>(value: &'a Option<PathBuf>, fallback: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .or(fallback.as_deref())
        .ok_or_else(|| anyhow!("missing {what}"))
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cfg.resolve(cli.seed)?;
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    let out = cli.out.as_deref();
    let need_out = || out.ok_or_else(|| anyhow!("missing --out"));
    match &cli.command {
        Command::MineShapes { inputs } => mine_shapes(&cfg, inputs, need_out()?),
        Command::Generate { count, shapes } => {
            let shapes = required(shapes, &cfg.paths.shapes, "--shapes")?.to_path_buf();
            generate(&cfg, *count, &shapes, need_out()?)
        }
        Command::Train { data, classifier, limit } => {
            let data = required(data, &cfg.paths.dataset, "--data")?.to_path_buf();
            if let Some(kind) = classifier {
                cfg.train.model = *kind;
            }
            train(&cfg, &data, *limit, need_out()?)
        }
        Command::Detect { model, data, skip, inputs } => {
            let model = required(model, &cfg.paths.model, "--model")?.to_path_buf();
            detect_images(&cfg, &model, data.as_deref(), *skip, inputs, need_out()?)
        }
        Command::Evaluate { gt, pred } => evaluate(&cfg, gt, pred, out),
        Command::RenderColor { layers, substrate_nm } => render_color(&cfg, *layers, *substrate_nm, out),
        Command::Import { dir, annotations, split } => {
            let manifest = import_dataset(dir, annotations.as_deref(), split)?;
            for c in &manifest.class_counts {
                println!("class {} ({}): {} instances", c.label, c.name, c.instances);
            }
            println!("{} images, {} instances", manifest.image_count, manifest.instance_count);
            match out {
                Some(path) => write_json(path, &manifest),
                None => Ok(()),
            }
        }
    }
}

fn mine_shapes(cfg: &PipelineConfig, inputs: &[PathBuf], out: &Path) -> Result<()> {
    let images = collect_images(inputs)?;
    if images.is_empty() {
        bail!("no images found");
    }
    let library = mine_files(&images, &cfg.mining.options())?;
    if library.is_empty() {
        bail!("no shapes passed the filter in {} images", images.len());
    }
    let staged = StagedDir::new(out)?;
    library.save(staged.path())?;
    staged.commit()?;
    println!("mined {} shapes from {} images", library.len(), images.len());
    Ok(())
}

fn generate(cfg: &PipelineConfig, count: usize, shapes: &Path, out: &Path) -> Result<()> {
    let library = ShapeLibrary::load(shapes)?;
    let setup = cfg.optical_setup()?;
    let generator = SceneGenerator::new(cfg.scene.clone(), &library, &setup)?;
    let staged = StagedDir::new(out)?;
    let mut annotations = generator.generate_dataset(count, staged.path())?;
    annotations.config = Some(cfg.to_json());
    write_json(&staged.path().join("annotations.json"), &annotations)?;
    staged.commit()?;
    println!("generated {count} images in {}", out.display());
    Ok(())
}

fn train(cfg: &PipelineConfig, data: &Path, limit: Option<usize>, out: &Path) -> Result<()> {
    let dataset = Dataset::load(data)?;
    let records = &dataset.file.images[..limit.unwrap_or(usize::MAX).min(dataset.file.images.len())];
    if records.is_empty() {
        bail!("{}: no images to train on", data.display());
    }
    let images: Vec<AnnotatedImage> = records
        .iter()
        .map(|r| annotated_image(&dataset, r))
        .collect::<Result<_>>()?;
    let (set, labels) = collect_training_set(&images, &dataset.class_names(), &cfg.collect)?;
    let mut model = train_classifier(&set, labels, &cfg.train)?;
    model.config = Some(cfg.to_json());
    write_json(out, &model)?;
    println!(
        "trained {:?} on {} contrast points from {} images",
        model.kind(),
        set.len(),
        records.len()
    );
    Ok(())
}

fn detect_images(
    cfg: &PipelineConfig,
    model_path: &Path,
    data: Option<&Path>,
    skip: usize,
    inputs: &[PathBuf],
    out: &Path,
) -> Result<()> {
    let model = ClassifierModel::load(model_path)?;
    // (id, file as recorded, path on disk)
    let mut jobs: Vec<(String, String, PathBuf)> = Vec::new();
    if let Some(data) = data {
        let dataset = Dataset::load(data)?;
        for r in dataset.file.images.iter().skip(skip) {
            jobs.push((r.id.clone(), r.file.clone(), dataset.image_path(r)));
        }
    }
    for p in collect_images(inputs)? {
        let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        jobs.push((id, p.display().to_string(), p));
    }
    if jobs.is_empty() {
        bail!("no images found");
    }
    let records: Vec<ImageRecord> = jobs
        .par_iter()
        .map(|(id, file, path)| {
            let img = load_rgb8(path)?;
            let raster = RgbRaster::from_rgb8(&img);
            let found = detect(&raster, &model, &cfg.detector).with_context(|| path.display().to_string())?;
            Ok(ImageRecord {
                id: id.clone(),
                file: file.clone(),
                width: raster.width,
                height: raster.height,
                metadata: None,
                instances: found
                    .into_iter()
                    .map(|d| InstanceRecord {
                        class_label: d.class_label,
                        layer_count: None,
                        area: d.area,
                        score: Some(d.confidence),
                        mask: RleMask::encode_region(&d.mask),
                    })
                    .collect(),
            })
        })
        .collect::<Result<_>>()?;
    let class_names = model
        .class_labels
        .iter()
        .zip(&model.class_names)
        .filter(|(l, _)| **l != BACKGROUND_LABEL)
        .map(|(&label, name)| ClassName { label, name: name.clone() })
        .collect();
    let mut file = AnnotationFile::new("detections", class_names);
    file.config = Some(cfg.to_json());
    file.images = records;
    write_json(out, &file)?;
    let total: usize = file.images.iter().map(|r| r.instances.len()).sum();
    println!("detected {total} instances in {} images", file.images.len());
    Ok(())
}

fn evaluate(cfg: &PipelineConfig, gt: &Path, pred: &Path, out: Option<&Path>) -> Result<()> {
    let gt_file = Dataset::load(gt)?.file;
    let pred_file = Dataset::load(pred)?.file;
    let report = ap50(&eval_instances(&gt_file)?, &eval_instances(&pred_file)?, &cfg.eval)?;
    for c in &report.classes {
        println!(
            "class {}: AP {:.4} ({} gt, {} det, {} tp)",
            c.class_label, c.ap, c.ground_truth, c.detections, c.true_positives
        );
    }
    match report.mean_ap {
        Some(m) => println!("mean AP{:.0}: {m:.4}", cfg.eval.iou_threshold * 100.0),
        None => println!("mean AP: undefined (no ground truth)"),
    }
    if let Some(path) = out {
        #[derive(Serialize)]
        struct Report<'a> {
            ground_truth: String,
            predictions: String,
            #[serde(flatten)]
            report: &'a flakelab::eval::EvalReport,
        }
        write_json(
            path,
            &Report {
                ground_truth: gt.display().to_string(),
                predictions: pred.display().to_string(),
                report: &report,
            },
        )?;
    }
    Ok(())
}

fn render_color(cfg: &PipelineConfig, layers: i64, substrate_nm: f64, out: Option<&Path>) -> Result<()> {
    let setup = cfg.optical_setup()?;
    let c = setup.color(layers, substrate_nm)?;
    let rgb8 = [c.r, c.g, c.b].map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8);
    println!(
        "{:.6} {:.6} {:.6} (rgb8 {} {} {})",
        c.r, c.g, c.b, rgb8[0], rgb8[1], rgb8[2]
    );
    if let Some(path) = out {
        write_json(
            path,
            &serde_json::json!({
                "material": setup.material.name,
                "layers": layers,
                "substrate_nm": substrate_nm,
                "rgb": [c.r, c.g, c.b],
                "rgb8": rgb8,
            }),
        )?;
    }
    Ok(())
}
