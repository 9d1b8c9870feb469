//! Mask IoU and AP at a fixed IoU threshold.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, RegionMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchConfig {
    pub iou_threshold: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { iou_threshold: 0.5 }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(Error::Config(format!("iou_threshold {} must lie in (0, 1]", self.iou_threshold)));
        }
        Ok(())
    }
}

pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    region_iou(&RegionMask::from_full(a), &RegionMask::from_full(b))
}

/// `|a & b| / |a | b|`, 0 when both are empty.
pub fn region_iou(a: &RegionMask, b: &RegionMask) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: a.dims(),
            actual: b.dims(),
        });
    }
    let inter = a.intersection_count(b);
    let union = a.area() + b.area() - inter;
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalInstance {
    pub mask: RegionMask,
    pub class_label: u32,
    /// Confidence; required for detections, ignored for ground truth.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageInstances {
    pub id: String,
    pub instances: Vec<EvalInstance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    /// Confidence of the detection that closes this point.
    pub score: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class_label: u32,
    pub ap: f64,
    pub ground_truth: usize,
    pub detections: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub pr_curve: Vec<PrPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_threshold: f64,
    /// Classes present in ground truth, ascending by label.
    pub classes: Vec<ClassReport>,
    /// Unweighted mean over `classes`; absent when there is no ground truth.
    pub mean_ap: Option<f64>,
    /// Detected classes with no ground-truth instance, left out of the mean.
    pub excluded_classes: Vec<u32>,
}

/// Area under the all-point interpolated precision envelope.
pub fn average_precision(hits: &[bool], num_gt: usize) -> f64 {
    pr_curve(hits, &vec![0.0; hits.len()], num_gt).0
}

fn pr_curve(hits: &[bool], scores: &[f64], num_gt: usize) -> (f64, Vec<PrPoint>) {
    if num_gt == 0 {
        return (0.0, Vec::new());
    }
    let mut tp = 0usize;
    let points: Vec<PrPoint> = hits
        .iter()
        .zip(scores)
        .enumerate()
        .map(|(i, (&hit, &score))| {
            tp += usize::from(hit);
            PrPoint {
                score,
                precision: tp as f64 / (i + 1) as f64,
                recall: tp as f64 / num_gt as f64,
            }
        })
        .collect();
    let mut envelope = vec![0.0; points.len()];
    let mut best: f64 = 0.0;
    for i in (0..points.len()).rev() {
        best = best.max(points[i].precision);
        envelope[i] = best;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, env) in points.iter().zip(&envelope) {
        ap += (p.recall - prev_recall) * env;
        prev_recall = p.recall;
    }
    (ap, points)
}

/// Greedy matching of one class: detections in descending confidence (stable
/// for ties) each take the unmatched ground truth of highest IoU at or above
/// the threshold, lowest index first on ties. Returns, per detection in
/// processing order, `(detection index, matched ground-truth index)`.
pub fn greedy_match(
    detections: &[(usize, &EvalInstance)],
    ground_truth: &[(usize, &EvalInstance)],
    threshold: f64,
) -> Result<Vec<(usize, Option<usize>)>> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].1.score.total_cmp(&detections[a].1.score));
    let mut taken = vec![false; ground_truth.len()];
    let mut out = Vec::with_capacity(order.len());
    for d in order {
        let (img, det) = detections[d];
        let mut best: Option<(usize, f64)> = None;
        for (g, (gimg, gt)) in ground_truth.iter().enumerate() {
            if taken[g] || *gimg != img {
                continue;
            }
            let iou = region_iou(&det.mask, &gt.mask)?;
            if iou >= threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
        }
        out.push((d, best.map(|b| b.0)));
    }
    Ok(out)
}

/// Per-class AP over a set of images and the unweighted mean over classes
/// present in the ground truth.
pub fn ap50(ground_truth: &[ImageInstances], detections: &[ImageInstances], cfg: &MatchConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let image_index: HashMap<&str, usize> = ground_truth.iter().enumerate().map(|(i, im)| (im.id.as_str(), i)).collect();
    if image_index.len() != ground_truth.len() {
        return Err(Error::InvalidInput("duplicate image id in ground truth".into()));
    }
    let mut gt_by_class: BTreeMap<u32, Vec<(usize, &EvalInstance)>> = BTreeMap::new();
    for (i, im) in ground_truth.iter().enumerate() {
        for inst in &im.instances {
            gt_by_class.entry(inst.class_label).or_default().push((i, inst));
        }
    }
    let mut det_by_class: BTreeMap<u32, Vec<(usize, &EvalInstance)>> = BTreeMap::new();
    for im in detections {
        let &i = image_index
            .get(im.id.as_str())
            .ok_or_else(|| Error::UnknownImage(im.id.clone()))?;
        for inst in &im.instances {
            if !inst.score.is_finite() {
                return Err(Error::InvalidInput(format!("detection in {} has a non-finite score", im.id)));
            }
            det_by_class.entry(inst.class_label).or_default().push((i, inst));
        }
    }
    let mut classes = Vec::new();
    for (&label, gts) in &gt_by_class {
        let dets = det_by_class.get(&label).map(Vec::as_slice).unwrap_or(&[]);
        let matches = greedy_match(dets, gts, cfg.iou_threshold)?;
        let hits: Vec<bool> = matches.iter().map(|m| m.1.is_some()).collect();
        let scores: Vec<f64> = matches.iter().map(|m| dets[m.0].1.score).collect();
        let (ap, pr) = pr_curve(&hits, &scores, gts.len());
        let tp = hits.iter().filter(|&&h| h).count();
        classes.push(ClassReport {
            class_label: label,
            ap,
            ground_truth: gts.len(),
            detections: dets.len(),
            true_positives: tp,
            false_positives: dets.len() - tp,
            pr_curve: pr,
        });
    }
    let excluded: BTreeSet<u32> = det_by_class.keys().filter(|l| !gt_by_class.contains_key(l)).copied().collect();
    let mean_ap = (!classes.is_empty()).then(|| classes.iter().map(|c| c.ap).sum::<f64>() / classes.len() as f64);
    Ok(EvalReport {
        iou_threshold: cfg.iou_threshold,
        classes,
        mean_ap,
        excluded_classes: excluded.into_iter().collect(),
    })
}
