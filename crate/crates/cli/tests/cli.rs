mod common;

use std::path::Path;

use common::*;
use serde_json::Value;

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn small_dataset(root: &Path, count: usize) -> std::path::PathBuf {
    let lib = mined_library(root, 5);
    let cfg = small_config(root);
    let out = root.join("data");
    flakelab_ok([
        "generate",
        "--config",
        path_str(&cfg),
        "--shapes",
        path_str(&lib),
        "--count",
        &count.to_string(),
        "--seed",
        "3",
        "--out",
        path_str(&out),
    ]);
    out
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = flakelab(["frobnicate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn evaluating_ground_truth_against_itself_is_perfect() {
    let root = tempfile::tempdir().unwrap();
    let data = small_dataset(root.path(), 3);
    let ann = data.join("annotations.json");
    let report = root.path().join("report.json");
    let stdout = flakelab_ok(["evaluate", "--gt", path_str(&ann), "--pred", path_str(&ann), "--out", path_str(&report)]);
    assert!(stdout.contains("mean AP50: 1.0000"), "{stdout}");
    let report = read_json(&report);
    assert_eq!(report["mean_ap"], 1.0);
    assert!(!report["classes"].as_array().unwrap().is_empty());
}

#[test]
fn import_counts_match_generation() {
    let root = tempfile::tempdir().unwrap();
    let data = small_dataset(root.path(), 10);
    let manifest_path = root.path().join("manifest.json");
    flakelab_ok(["import", path_str(&data), "--split", "test", "--out", path_str(&manifest_path)]);
    let manifest = read_json(&manifest_path);
    let ann = read_json(&data.join("annotations.json"));
    let images = ann["images"].as_array().unwrap();
    assert_eq!(manifest["image_count"], 10);
    assert_eq!(manifest["split"], "test");
    let mut expected = std::collections::BTreeMap::new();
    for img in images {
        for inst in img["instances"].as_array().unwrap() {
            *expected.entry(inst["class_label"].as_u64().unwrap()).or_insert(0u64) += 1;
        }
    }
    for c in manifest["class_counts"].as_array().unwrap() {
        let label = c["label"].as_u64().unwrap();
        assert_eq!(c["instances"].as_u64().unwrap(), expected.get(&label).copied().unwrap_or(0), "class {label}");
    }
    assert_eq!(manifest["instance_count"].as_u64().unwrap(), expected.values().sum::<u64>());
    assert_eq!(manifest["config"], ann["config"]);
}

#[test]
fn corrupted_annotation_is_named() {
    let root = tempfile::tempdir().unwrap();
    let data = small_dataset(root.path(), 10);
    let ann_path = data.join("annotations.json");
    let mut ann = read_json(&ann_path);
    let victim = ann["images"]
        .as_array()
        .unwrap()
        .iter()
        .position(|img| !img["instances"].as_array().unwrap().is_empty())
        .unwrap();
    let counts = &mut ann["images"][victim]["instances"][0]["mask"]["counts"];
    counts.as_array_mut().unwrap().push(Value::from(7));
    std::fs::write(&ann_path, serde_json::to_string(&ann).unwrap()).unwrap();

    let out = flakelab(["import", path_str(&data)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    let victim_file = format!("img_{victim:06}.png");
    assert!(err.contains(&victim_file), "{err}");
    for i in (0..10).filter(|&i| i != victim) {
        assert!(!err.contains(&format!("img_{i:06}.png")), "{err}");
    }
}

#[test]
fn empty_directory_has_no_images() {
    let root = tempfile::tempdir().unwrap();
    let out = flakelab(["import", path_str(root.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no images found"));
}

#[test]
fn config_errors_report_file_key_and_reason() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("bad.toml");
    std::fs::write(&cfg, "[scene]\nwidth = 64\n\n[detector]\nmin_area = \"large\"\n").unwrap();
    let out = flakelab(["render-color", "--config", path_str(&cfg)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("bad.toml") && err.contains("detector.min_area") && err.contains("line 5"), "{err}");
    assert!(err.contains("invalid type"), "{err}");

    std::fs::write(&cfg, "[scene]\nwdith = 64\n").unwrap();
    let err = String::from_utf8_lossy(&flakelab(["render-color", "--config", path_str(&cfg)]).stderr).into_owned();
    assert!(err.contains("wdith") && err.contains("unknown field"), "{err}");
}

#[test]
fn failed_generation_leaves_no_output() {
    let root = tempfile::tempdir().unwrap();
    let lib = mined_library(root.path(), 6);
    let cfg = root.path().join("c.toml");
    std::fs::write(&cfg, "[scene]\nmaterial = \"wse2\"\n[material]\nname = \"hbn\"\n").unwrap();
    let out_dir = root.path().join("never");
    let out = flakelab(["generate", "--config", path_str(&cfg), "--shapes", path_str(&lib), "--count", "2", "--out", path_str(&out_dir)]);
    assert!(!out.status.success());
    assert!(!out_dir.exists());
    let leftovers: Vec<_> = std::fs::read_dir(root.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.contains("tmp"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn train_detect_evaluate_pipeline_runs() {
    let root = tempfile::tempdir().unwrap();
    let data = small_dataset(root.path(), 6);
    let ann = data.join("annotations.json");
    let model = root.path().join("model.json");
    let dets = root.path().join("dets.json");
    flakelab_ok(["train", "--data", path_str(&ann), "--limit", "4", "--out", path_str(&model)]);
    let m = read_json(&model);
    assert_eq!(m["format"], "flakelab-classifier");
    assert_eq!(m["model"]["kind"], "gmm");
    assert_eq!(m["class_labels"][0], 0);
    flakelab_ok(["detect", "--model", path_str(&model), "--data", path_str(&ann), "--skip", "4", "--jobs", "1", "--out", path_str(&dets)]);
    let d = read_json(&dets);
    assert_eq!(d["images"].as_array().unwrap().len(), 2);
    assert_eq!(d["images"][0]["id"], "img_000004");
    let stdout = flakelab_ok(["evaluate", "--gt", path_str(&ann), "--pred", path_str(&dets)]);
    assert!(stdout.contains("mean AP50"), "{stdout}");
}

#[test]
fn render_color_prints_one_line() {
    let stdout = flakelab_ok(["render-color", "--layers", "2", "--substrate-nm", "90"]);
    let fields: Vec<f64> = stdout.split_whitespace().take(3).map(|v| v.parse().unwrap()).collect();
    assert_eq!(fields.len(), 3);
    assert!(fields.iter().all(|v| (0.0..=1.0).contains(v)));
}
