//! Training-set cleanup: neighbor-vote denoising, density outlier removal,
//! standardization and class balancing.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::set::LabeledContrastSet;
use super::spatial::KdTree;
use crate::error::{Error, Result};

/// Drop points whose label loses the vote of their `k` nearest neighbors.
/// A point survives when its own label is among the most frequent.
pub fn knn_denoise(set: &LabeledContrastSet, k: usize) -> Result<LabeledContrastSet> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if set.len() < k + 1 {
        return Err(Error::InvalidInput(format!(
            "neighbor denoising with k = {k} needs at least {} points, got {}",
            k + 1,
            set.len()
        )));
    }
    let tree = KdTree::new(set.dim(), set.points_flat());
    let mut votes = vec![0usize; set.num_classes()];
    let keep: Vec<usize> = (0..set.len())
        .filter(|&i| {
            votes.iter_mut().for_each(|v| *v = 0);
            for (_, j) in tree.nearest(set.point(i), k, Some(i)) {
                votes[set.label(j)] += 1;
            }
            let best = votes.iter().copied().max().unwrap_or(0);
            votes[set.label(i)] == best
        })
        .collect();
    Ok(set.subset(&keep))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityRole {
    Core,
    Border,
    Noise,
}

/// DBSCAN point roles. Neighborhoods include the point itself; a point is
/// core when at least `min_pts` points lie within `eps`.
pub fn dbscan_roles(dim: usize, points: &[f64], eps: f64, min_pts: usize) -> Vec<DensityRole> {
    let n = points.len() / dim;
    let tree = KdTree::new(dim, points);
    let r2 = eps * eps;
    let neighbors: Vec<Vec<usize>> = (0..n).map(|i| tree.within(&points[i * dim..(i + 1) * dim], r2)).collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();
    (0..n)
        .map(|i| {
            if core[i] {
                DensityRole::Core
            } else if neighbors[i].iter().any(|&j| core[j]) {
                DensityRole::Border
            } else {
                DensityRole::Noise
            }
        })
        .collect()
}

/// Remove per-class density noise; clusters are kept whole.
pub fn dbscan_filter(set: &LabeledContrastSet, eps: f64, min_pts: usize) -> Result<LabeledContrastSet> {
    if !(eps > 0.0) || min_pts == 0 {
        return Err(Error::InvalidInput(format!("invalid DBSCAN parameters eps = {eps}, min_pts = {min_pts}")));
    }
    let counts = set.class_counts();
    let mut keep = vec![false; set.len()];
    for class in 0..set.num_classes() {
        let idx = set.class_indices(class);
        if idx.is_empty() {
            continue;
        }
        let pts: Vec<f64> = idx.iter().flat_map(|&i| set.point(i).iter().copied()).collect();
        let roles = dbscan_roles(set.dim(), &pts, eps, min_pts);
        for (&i, role) in idx.iter().zip(roles) {
            keep[i] = role != DensityRole::Noise;
        }
        if counts[class] > 0 && !idx.iter().any(|&i| keep[i]) {
            return Err(set.empty_class_error(class, "outlier removal"));
        }
    }
    let kept: Vec<usize> = (0..set.len()).filter(|&i| keep[i]).collect();
    Ok(set.subset(&kept))
}

/// Per-dimension affine map to zero mean and unit (population) deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn fit(set: &LabeledContrastSet) -> Result<Self> {
        let (n, d) = (set.len(), set.dim());
        if n < 2 {
            return Err(Error::InvalidInput("standardization needs at least 2 points".into()));
        }
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(set.point(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for i in 0..n {
            for ((s, v), m) in var.iter_mut().zip(set.point(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std: Vec<f64> = var.iter().map(|s| (s / n as f64).sqrt()).collect();
        if let Some(dim) = std.iter().position(|&s| !(s > 0.0)) {
            return Err(Error::InvalidInput(format!("dimension {dim} has zero variance")));
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_in_place(&self, point: &mut [f64]) {
        for ((v, m), s) in point.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }

    pub fn apply(&self, point: &[f64]) -> Vec<f64> {
        let mut out = point.to_vec();
        self.apply_in_place(&mut out);
        out
    }

    pub fn apply_set(&self, set: &LabeledContrastSet) -> LabeledContrastSet {
        let mut out = set.clone();
        for p in out.points_flat_mut().chunks_mut(self.dim()) {
            self.apply_in_place(p);
        }
        out
    }
}

pub fn standardize_fit_apply(set: &LabeledContrastSet) -> Result<(LabeledContrastSet, Standardizer)> {
    let st = Standardizer::fit(set)?;
    Ok((st.apply_set(set), st))
}

/// Upsample every class with replacement to the largest class count.
/// Original points keep their order; draws are appended class by class.
pub fn balance_classes(set: &LabeledContrastSet, rng: &mut impl Rng) -> Result<LabeledContrastSet> {
    let counts = set.class_counts();
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(set.empty_class_error(empty, "balancing"));
    }
    let n_max = counts.iter().copied().max().unwrap_or(0);
    let mut out = set.clone();
    for (class, &count) in counts.iter().enumerate() {
        if count == n_max {
            continue;
        }
        let idx = set.class_indices(class);
        for _ in count..n_max {
            let i = idx[rng.random_range(0..idx.len())];
            out.push(set.point(i), class);
        }
    }
    Ok(out)
}

/// Seeded subsample of at most `cap` points per class, preserving order.
pub fn cap_per_class(set: &LabeledContrastSet, cap: usize, rng: &mut impl Rng) -> LabeledContrastSet {
    let mut keep = Vec::new();
    for class in 0..set.num_classes() {
        let idx = set.class_indices(class);
        if idx.len() <= cap {
            keep.extend(idx);
        } else {
            let mut chosen: Vec<usize> = sample(rng, idx.len(), cap).into_iter().map(|j| idx[j]).collect();
            chosen.sort_unstable();
            keep.extend(chosen);
        }
    }
    keep.sort_unstable();
    set.subset(&keep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Neighbors consulted by the denoising vote.
    pub knn_k: usize,
    /// DBSCAN radius in raw contrast units.
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    /// Per-class subsample applied before everything else; `None` keeps all points.
    pub max_points_per_class: Option<usize>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            knn_k: 10,
            dbscan_eps: 0.1,
            dbscan_min_pts: 10,
            max_points_per_class: Some(2000),
        }
    }
}

/// Cap, denoise, filter, standardize and balance, in that order.
pub fn preprocess(
    set: &LabeledContrastSet,
    cfg: &PreprocessConfig,
    rng: &mut impl Rng,
) -> Result<(LabeledContrastSet, Standardizer)> {
    let capped = match cfg.max_points_per_class {
        Some(cap) => cap_per_class(set, cap, rng),
        None => set.clone(),
    };
    let denoised = knn_denoise(&capped, cfg.knn_k)?;
    let filtered = dbscan_filter(&denoised, cfg.dbscan_eps, cfg.dbscan_min_pts)?;
    let (standardized, st) = standardize_fit_apply(&filtered)?;
    Ok((balance_classes(&standardized, rng)?, st))
}

#[cfg(test)]
mod tests {
    use rand_distr::{Distribution, Normal};

    use super::*;
    use crate::rng::rng_from_seed;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    fn blobs(seed: u64, per_class: usize, centers: &[[f64; 3]], sigma: f64) -> LabeledContrastSet {
        let mut rng = rng_from_seed(seed);
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per_class {
                pts.push(center.map(|m| m + normal.sample(&mut rng)));
                labels.push(c);
            }
        }
        LabeledContrastSet::from_points(&pts, labels, names(centers.len())).unwrap()
    }

    #[test]
    fn knn_keeps_clean_clusters() {
        let set = blobs(1, 50, &[[0.0; 3], [10.0, 0.0, 0.0]], 0.5);
        assert_eq!(knn_denoise(&set, 5).unwrap(), set);
    }

    #[test]
    fn knn_drops_planted_mislabel() {
        let mut set = blobs(2, 50, &[[0.0; 3], [10.0, 0.0, 0.0]], 0.5);
        set.push(&[10.0, 0.0, 0.0], 0);
        let out = knn_denoise(&set, 5).unwrap();
        assert_eq!(out.len(), set.len() - 1);
        assert_eq!(out, set.subset(&(0..100).collect::<Vec<_>>()));
    }

    #[test]
    fn knn_needs_more_than_k_points() {
        let set = blobs(3, 2, &[[0.0; 3]], 1.0);
        assert!(knn_denoise(&set, 2).is_err());
        assert!(knn_denoise(&set, 1).is_ok());
    }

    fn brute_neighbors(set: &LabeledContrastSet, i: usize, k: usize) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = (0..set.len())
            .filter(|&j| j != i)
            .map(|j| (set.point(i).iter().zip(set.point(j)).map(|(a, b)| (a - b).powi(2)).sum(), j))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().take(k).map(|x| x.1).collect()
    }

    #[test]
    fn knn_flipped_label_recovery_against_brute_force() {
        let mut rng = rng_from_seed(77);
        let clean = blobs(5, 250, &[[0.0; 3], [3.0, 3.0, 0.0]], 1.0);
        let mut labels = clean.labels().to_vec();
        let flipped = sample(&mut rng, 500, 25).into_vec();
        for &i in &flipped {
            labels[i] = 1 - labels[i];
        }
        let noisy = LabeledContrastSet::new(3, clean.points_flat().to_vec(), labels, names(2)).unwrap();
        // oracle: the same vote with brute-force neighbors
        let expected: Vec<usize> = (0..500)
            .filter(|&i| {
                let nb = brute_neighbors(&noisy, i, 10);
                let same = nb.iter().filter(|&&j| noisy.label(j) == noisy.label(i)).count();
                same * 2 >= nb.len()
            })
            .collect();
        let out = knn_denoise(&noisy, 10).unwrap();
        assert_eq!(out, noisy.subset(&expected));
        let removed_flipped = flipped.iter().filter(|i| !expected.contains(i)).count();
        let removed_clean = (0..500).filter(|i| !flipped.contains(i) && !expected.contains(i)).count();
        assert!(removed_flipped as f64 >= 0.8 * 25.0, "removed {removed_flipped} of 25 flipped");
        assert!(removed_clean as f64 <= 0.05 * 475.0, "removed {removed_clean} clean points");
    }

    fn naive_dbscan(pts: &[[f64; 3]], eps: f64, min_pts: usize) -> Vec<DensityRole> {
        let n = pts.len();
        let near = |i: usize, j: usize| (0..3).map(|d| (pts[i][d] - pts[j][d]).powi(2)).sum::<f64>() <= eps * eps;
        let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
        // cluster expansion by breadth-first search from each core point
        let mut cluster = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if !core[s] || cluster[s] != usize::MAX {
                continue;
            }
            let mut queue = vec![s];
            cluster[s] = next;
            while let Some(i) = queue.pop() {
                if !core[i] {
                    continue;
                }
                for j in 0..n {
                    if near(i, j) && cluster[j] == usize::MAX {
                        cluster[j] = next;
                        queue.push(j);
                    }
                }
            }
            next += 1;
        }
        (0..n)
            .map(|i| match (core[i], cluster[i] != usize::MAX) {
                (true, _) => DensityRole::Core,
                (false, true) => DensityRole::Border,
                (false, false) => DensityRole::Noise,
            })
            .collect()
    }

    #[test]
    fn dbscan_matches_quadratic_reference() {
        let mut rng = rng_from_seed(200);
        let pts: Vec<[f64; 3]> = (0..200)
            .map(|i| {
                let c = if i % 3 == 0 { 0.0 } else { 1.0 };
                [c + rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-1.0..1.0)]
            })
            .collect();
        let flat: Vec<f64> = pts.iter().flatten().copied().collect();
        for (eps, min_pts) in [(0.1, 3), (0.2, 5), (0.3, 10), (0.05, 1)] {
            let roles = dbscan_roles(3, &flat, eps, min_pts);
            assert_eq!(roles, naive_dbscan(&pts, eps, min_pts), "eps {eps}, min_pts {min_pts}");
        }
    }

    #[test]
    fn dbscan_examples() {
        let set = blobs(8, 100, &[[0.0; 3]], 0.05);
        assert_eq!(dbscan_filter(&set, 1.0, 5).unwrap(), set);
        let mut with_outlier = set.clone();
        with_outlier.push(&[10.0, 0.0, 0.0], 0);
        assert_eq!(dbscan_filter(&with_outlier, 0.1, 5).unwrap().len(), dbscan_filter(&set, 0.1, 5).unwrap().len());
        let out = dbscan_filter(&with_outlier, 0.1, 5).unwrap();
        assert!((0..out.len()).all(|i| out.point(i)[0] < 5.0));
    }

    #[test]
    fn dbscan_emptied_class_is_named() {
        let mut set = blobs(9, 50, &[[0.0; 3]], 0.01);
        let mut names = set.class_names().to_vec();
        names.push("lonely".into());
        set = LabeledContrastSet::new(3, set.points_flat().to_vec(), set.labels().to_vec(), names).unwrap();
        set.push(&[5.0, 5.0, 5.0], 1);
        let err = dbscan_filter(&set, 0.1, 3).unwrap_err().to_string();
        assert!(err.contains("lonely"), "{err}");
    }

    #[test]
    fn standardize_examples() {
        let set = LabeledContrastSet::from_points(&[[-1.0], [1.0]], vec![0, 0], names(1)).unwrap();
        let (out, st) = standardize_fit_apply(&set).unwrap();
        assert_eq!(out, set);
        assert_eq!(st.std, vec![1.0]);

        let set = blobs(10, 300, &[[0.3, -2.0, 5.0]], 0.7);
        let shifted = LabeledContrastSet::new(3, set.points_flat().iter().enumerate().map(|(i, v)| v + [4.0, -1.5, 0.25][i % 3]).collect(), set.labels().to_vec(), names(1)).unwrap();
        let (a, _) = standardize_fit_apply(&set).unwrap();
        let (b, _) = standardize_fit_apply(&shifted).unwrap();
        for (x, y) in a.points_flat().iter().zip(b.points_flat()) {
            assert!((x - y).abs() < 1e-12);
        }
        let n = a.len() as f64;
        for d in 0..3 {
            let mean = (0..a.len()).map(|i| a.point(i)[d]).sum::<f64>() / n;
            let std = ((0..a.len()).map(|i| (a.point(i)[d] - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() < 1e-9 && (std - 1.0).abs() < 1e-9);
        }
        let constant = LabeledContrastSet::from_points(&[[1.0, 2.0], [1.0, 3.0]], vec![0, 0], names(1)).unwrap();
        assert!(standardize_fit_apply(&constant).is_err());
    }

    #[test]
    fn balance_examples() {
        let mut rng = rng_from_seed(4);
        let set = blobs(11, 20, &[[0.0; 3], [5.0; 3]], 1.0);
        assert_eq!(balance_classes(&set, &mut rng).unwrap(), set);

        let big = blobs(12, 100, &[[0.0; 3]], 1.0);
        let mut set = LabeledContrastSet::new(3, big.points_flat().to_vec(), big.labels().to_vec(), names(2)).unwrap();
        for i in 0..10 {
            set.push(&[50.0 + i as f64, 0.0, 0.0], 1);
        }
        let out = balance_classes(&set, &mut rng).unwrap();
        assert_eq!(out.class_counts(), vec![100, 100]);
        let minority: Vec<&[f64]> = set.class_indices(1).into_iter().map(|i| set.point(i)).collect();
        assert!(out.class_indices(1).into_iter().all(|i| minority.contains(&out.point(i))));

        let empty = LabeledContrastSet::new(3, big.points_flat().to_vec(), big.labels().to_vec(), names(2)).unwrap();
        assert!(balance_classes(&empty, &mut rng).is_err());
    }

    #[test]
    fn stages_are_idempotent() {
        let mut rng = rng_from_seed(13);
        let set = blobs(14, 200, &[[0.0; 3], [4.0, 1.0, 0.0], [0.0, 4.0, 2.0]], 0.6);
        let once = knn_denoise(&set, 10).unwrap();
        assert_eq!(knn_denoise(&once, 10).unwrap(), once);
        let once = dbscan_filter(&set, 0.4, 10).unwrap();
        assert_eq!(dbscan_filter(&once, 0.4, 10).unwrap(), once);
        let (once, _) = standardize_fit_apply(&set).unwrap();
        let (twice, _) = standardize_fit_apply(&once).unwrap();
        for (a, b) in once.points_flat().iter().zip(twice.points_flat()) {
            assert!((a - b).abs() < 1e-12);
        }
        let once = balance_classes(&set, &mut rng).unwrap();
        assert_eq!(balance_classes(&once, &mut rng).unwrap(), once);
    }

    #[test]
    fn cap_keeps_at_most_cap() {
        let set = blobs(15, 100, &[[0.0; 3], [1.0; 3]], 1.0);
        let mut rng = rng_from_seed(1);
        let capped = cap_per_class(&set, 30, &mut rng);
        assert_eq!(capped.class_counts(), vec![30, 30]);
    }
}
