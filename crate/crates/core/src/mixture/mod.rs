//! Per-pixel layer classification in contrast space.

mod amm;
mod gaussian;
mod gmm;
mod model;
mod preprocess;
mod set;
mod spatial;

pub use amm::{
    classify_amm, design_matrix, power_iteration_step, spectral_normalize, spectral_scale, train_amm,
    train_amm_monitored, AmmConfig, AmmModel, AmmNetwork, SpectralLinear, TrainConfig, TrainStep,
};
pub use gaussian::{Classification, DensityModel, Gaussian, COVARIANCE_RIDGE};
pub use gmm::{classify_gmm, fit_gmm, GmmModel, DEFAULT_REJECTION_QUANTILE};
pub use model::{train_classifier, Classifier, ClassifierKind, ClassifierModel, ModelKind, TrainerConfig};
pub use preprocess::{
    balance_classes, cap_per_class, dbscan_filter, dbscan_roles, knn_denoise, preprocess, standardize_fit_apply,
    DensityRole, PreprocessConfig, Standardizer,
};
pub use set::LabeledContrastSet;
pub use spatial::KdTree;
