use serde::{Deserialize, Serialize};

use super::gaussian::{Classification, DensityModel};
use super::preprocess::Standardizer;
use super::set::LabeledContrastSet;
use crate::error::{Error, Result};

pub const DEFAULT_REJECTION_QUANTILE: f64 = 0.001;

/// Per-class Gaussians fitted directly in (standardized) contrast space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmModel {
    pub standardizer: Standardizer,
    pub density: DensityModel,
}

/// Fit to an already standardized set; `standardizer` is stored so that
/// [`GmmModel::classify`] accepts raw points.
pub fn fit_gmm(set: &LabeledContrastSet, standardizer: Standardizer, rejection_quantile: f64) -> Result<GmmModel> {
    if standardizer.dim() != set.dim() {
        return Err(Error::InvalidInput("standardizer dimension does not match the set".into()));
    }
    let density = DensityModel::fit(
        set.dim(),
        set.points_flat(),
        set.labels(),
        set.num_classes(),
        false,
        rejection_quantile,
    )?;
    Ok(GmmModel { standardizer, density })
}

impl GmmModel {
    pub fn classify_standardized(&self, x: &[f64]) -> Classification {
        self.density.classify(x)
    }

    pub fn classify(&self, raw: &[f64]) -> Classification {
        self.density.classify(&self.standardizer.apply(raw))
    }
}

pub fn classify_gmm(model: &GmmModel, raw: &[f64]) -> Classification {
    model.classify(raw)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    use super::*;
    use crate::mixture::preprocess::standardize_fit_apply;
    use crate::rng::rng_from_seed;

    fn sample_set(seed: u64, means: &[[f64; 3]], sigma: f64, n: usize) -> LabeledContrastSet {
        let mut rng = rng_from_seed(seed);
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for (c, m) in means.iter().enumerate() {
            for _ in 0..n {
                pts.push(m.map(|v| v + normal.sample(&mut rng)));
                labels.push(c);
            }
        }
        let names = (0..means.len()).map(|i| i.to_string()).collect();
        LabeledContrastSet::from_points(&pts, labels, names).unwrap()
    }

    #[test]
    fn fitted_means_within_sampling_bound() {
        let means = [[0.0, 0.0, 0.0], [2.0, -1.0, 0.5], [-3.0, 1.0, 4.0]];
        let (sigma, n) = (0.5, 400);
        let set = sample_set(31, &means, sigma, n);
        let model = fit_gmm(&set, Standardizer::identity(3), DEFAULT_REJECTION_QUANTILE).unwrap();
        let bound = 3.0 * sigma / (n as f64).sqrt();
        for (g, m) in model.density.components.iter().zip(&means) {
            for d in 0..3 {
                assert!((g.mean()[d] - m[d]).abs() < bound);
            }
        }
        let priors: f64 = model.density.priors.iter().sum();
        assert!((priors - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_classes_split_at_midplane() {
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for s in [-1.0, 1.0] {
            for dx in [-0.5, 0.5] {
                for dy in [-0.5, 0.5] {
                    for dz in [-0.5, 0.5] {
                        pts.push([2.0 * s + dx, dy, dz]);
                        labels.push(usize::from(s > 0.0));
                    }
                }
            }
        }
        let set = LabeledContrastSet::from_points(&pts, labels, vec!["a".into(), "b".into()]).unwrap();
        let model = fit_gmm(&set, Standardizer::identity(3), 0.001).unwrap();
        let c = model.classify(&[0.0, 0.3, -0.2]);
        assert!((c.posteriors[0] - 0.5).abs() < 1e-12);
        assert_eq!(model.classify(&[-2.0, 0.0, 0.0]).class, 0);
        assert_eq!(model.classify(&[2.0, 0.0, 0.0]).class, 1);
    }

    #[test]
    fn distant_point_is_rejected() {
        let set = sample_set(32, &[[0.0; 3], [3.0, 0.0, 0.0]], 0.5, 500);
        let model = fit_gmm(&set, Standardizer::identity(3), DEFAULT_REJECTION_QUANTILE).unwrap();
        // step away from both means along z until 10 Mahalanobis units from each
        let mut z = 0.0;
        let far = loop {
            let p = [1.5, 0.0, z];
            if model.density.components.iter().all(|g| g.mahalanobis2(&p).sqrt() >= 10.0) {
                break p;
            }
            z += 0.05;
        };
        let c = model.classify(&far);
        assert!(c.log_density < model.density.rejection_threshold);
        assert!(c.rejected);
        assert!(!model.classify(&[0.0; 3]).rejected);
    }

    #[test]
    fn too_few_points_per_class() {
        let set = sample_set(33, &[[0.0; 3]], 1.0, 3);
        assert!(matches!(fit_gmm(&set, Standardizer::identity(3), 0.001), Err(Error::EmptyClass(_))));
    }

    #[test]
    fn argmax_invariant_under_refit_after_rescaling() {
        let set = sample_set(34, &[[0.0; 3], [1.0, 2.0, 0.0], [0.0, -1.0, 1.5]], 0.7, 150);
        let (std_set, st) = standardize_fit_apply(&set).unwrap();
        let model = fit_gmm(&std_set, st, 0.001).unwrap();
        let (a, b) = ([3.0, 0.5, -2.0], [-10.0, 4.0, 0.25]);
        let scaled = LabeledContrastSet::new(
            3,
            set.points_flat().iter().enumerate().map(|(i, v)| v * a[i % 3] + b[i % 3]).collect(),
            set.labels().to_vec(),
            set.class_names().to_vec(),
        )
        .unwrap();
        let (std_scaled, st2) = standardize_fit_apply(&scaled).unwrap();
        let model2 = fit_gmm(&std_scaled, st2, 0.001).unwrap();
        let mut rng = rng_from_seed(35);
        for _ in 0..500 {
            let p: [f64; 3] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
            let q: [f64; 3] = std::array::from_fn(|d| p[d] * a[d] + b[d]);
            assert_eq!(model.classify(&p).class, model2.classify(&q).class);
        }
    }

    proptest! {
        #[test]
        fn posteriors_are_distributions(p in prop::array::uniform3(-50.0..50.0f64)) {
            let set = sample_set(36, &[[0.0; 3], [1.0, 1.0, 1.0], [-2.0, 0.0, 1.0]], 0.4, 50);
            let model = fit_gmm(&set, Standardizer::identity(3), 0.001).unwrap();
            let c = model.classify(&p);
            prop_assert!(c.posteriors.iter().all(|&v| v >= 0.0));
            prop_assert!((c.posteriors.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
