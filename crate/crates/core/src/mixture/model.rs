use std::path::Path;

use serde::{Deserialize, Serialize};

use super::amm::{train_amm, AmmConfig, AmmModel, TrainConfig};
use super::gaussian::Classification;
use super::gmm::{fit_gmm, GmmModel};
use super::preprocess::{preprocess, PreprocessConfig};
use super::set::LabeledContrastSet;
use crate::error::{Error, Result};
use crate::rng::derived_rng;

pub const MODEL_FORMAT: &str = "flakelab-classifier";
pub const MODEL_VERSION: u32 = 1;

/// Anything that maps a raw contrast point to class posteriors.
pub trait Classifier {
    fn classify(&self, raw: &[f64]) -> Classification;
}

impl Classifier for GmmModel {
    fn classify(&self, raw: &[f64]) -> Classification {
        GmmModel::classify(self, raw)
    }
}

impl Classifier for AmmModel {
    fn classify(&self, raw: &[f64]) -> Classification {
        AmmModel::classify(self, raw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Gmm,
    Amm,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gmm" => Ok(Self::Gmm),
            "amm" => Ok(Self::Amm),
            other => Err(Error::Config(format!("unknown model kind {other:?}; expected gmm or amm"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum ClassifierKind {
    Gmm(GmmModel),
    Amm(AmmModel),
}

/// A trained classifier plus the dataset class labels its outputs map to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierModel {
    pub format: String,
    pub version: u32,
    /// Dataset class label of each internal class index; label 0 is background.
    pub class_labels: Vec<u32>,
    pub class_names: Vec<String>,
    pub model: ClassifierKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl Classifier for ClassifierModel {
    fn classify(&self, raw: &[f64]) -> Classification {
        match &self.model {
            ClassifierKind::Gmm(m) => m.classify(raw),
            ClassifierKind::Amm(m) => m.classify(raw),
        }
    }
}

impl ClassifierModel {
    pub fn kind(&self) -> ModelKind {
        match self.model {
            ClassifierKind::Gmm(_) => ModelKind::Gmm,
            ClassifierKind::Amm(_) => ModelKind::Amm,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("classifier model", e))
    }

    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text).map_err(|e| Error::json(context, e))?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(Error::InvalidInput(format!(
                "{context}: unsupported model format {:?} version {}",
                model.format, model.version
            )));
        }
        let k = match &model.model {
            ClassifierKind::Gmm(m) => m.density.num_classes(),
            ClassifierKind::Amm(m) => m.density.num_classes(),
        };
        if model.class_labels.len() != k || model.class_names.len() != k {
            return Err(Error::InvalidInput(format!(
                "{context}: {} labels and {} names for {k} classes",
                model.class_labels.len(),
                model.class_names.len()
            )));
        }
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    pub model: ModelKind,
    pub preprocess: PreprocessConfig,
    pub amm: AmmConfig,
    pub train: TrainConfig,
}

/// Preprocess a raw contrast set and fit the configured classifier.
/// `class_labels[i]` is the dataset label of internal class `i`.
pub fn train_classifier(set: &LabeledContrastSet, class_labels: Vec<u32>, cfg: &TrainerConfig) -> Result<ClassifierModel> {
    if class_labels.len() != set.num_classes() {
        return Err(Error::InvalidInput(format!(
            "{} class labels for {} classes",
            class_labels.len(),
            set.num_classes()
        )));
    }
    let mut rng = derived_rng(cfg.train.seed, "preprocess", 0);
    let (prepared, standardizer) = preprocess(set, &cfg.preprocess, &mut rng)?;
    let model = match cfg.model {
        ModelKind::Gmm => ClassifierKind::Gmm(fit_gmm(&prepared, standardizer, cfg.train.rejection_quantile)?),
        ModelKind::Amm => ClassifierKind::Amm(train_amm(&prepared, standardizer, &cfg.amm, &cfg.train)?),
    };
    Ok(ClassifierModel {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        class_labels,
        class_names: set.class_names().to_vec(),
        model,
        config: Some(serde_json::to_value(cfg).map_err(|e| Error::json("trainer config", e))?),
    })
}
