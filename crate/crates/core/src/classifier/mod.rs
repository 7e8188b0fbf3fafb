//! Dialect classifiers: hashed n-gram softmax models, posterior-averaging
//! ensembles, exhaustive ensemble search and embeddings for DFS.

mod ensemble;
mod evaluate;
mod featurize;
mod io;
mod model;

use serde::{Deserialize, Serialize};

use crate::label::DialectLabel;

pub use ensemble::{ensemble_search, Ensemble, SubsetScore, MAX_SEARCH_MEMBERS};
pub use evaluate::{evaluate_classifier, ClassMetrics, ClassificationReport};
pub use featurize::{featurize, l2_normalize, FeaturizerConfig, SparseVector};
pub use io::{from_bytes, load_model, save_model, to_bytes, MODEL_FORMAT_VERSION};
pub use model::{default_base_configs, train, train_with_labels, BaseClassifier, TrainMeta};

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("invalid featurizer config: {0}")]
    InvalidFeaturizer(String),
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("label {0} is not in the model's label set")]
    UnknownLabel(DialectLabel),
    #[error("ensemble members disagree on the label set")]
    LabelSetMismatch,
    #[error("ensemble needs between 1 and {max} members, got {got}")]
    MemberCount { got: usize, max: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Classifier output for one text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub posterior: Vec<f64>,
    pub label: DialectLabel,
    pub logits: Vec<f64>,
}

impl Prediction {
    /// Builds a prediction from a posterior; the label is the first maximum.
    pub fn from_parts(labels: &[DialectLabel], posterior: Vec<f64>, logits: Vec<f64>) -> Self {
        let label = labels[argmax(&posterior)].clone();
        Self { posterior, label, logits }
    }

    /// Posterior mass on `label`, zero when the label is not in `labels`.
    pub fn probability_of(&self, labels: &[DialectLabel], label: &DialectLabel) -> f64 {
        labels.iter().position(|l| l == label).map_or(0.0, |i| self.posterior[i])
    }
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Embedding space used for DFS.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    /// L2-normalized hashed feature vector; dialect-agnostic.
    Raw,
    /// Pre-softmax class scores; dialect-aware.
    #[default]
    Logit,
}

impl std::str::FromStr for EmbeddingMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(Self::Raw),
            "logit" => Ok(Self::Logit),
            other => Err(format!("unknown embedding mode {other:?}")),
        }
    }
}

/// Anything that yields a posterior over a fixed label set.
pub trait Classify: Send + Sync {
    fn labels(&self) -> &[DialectLabel];
    fn predict_proba(&self, text: &str) -> Prediction;
    fn embed(&self, text: &str, mode: EmbeddingMode) -> Vec<f64>;

    fn label_index(&self, label: &DialectLabel) -> Option<usize> {
        self.labels().iter().position(|l| l == label)
    }
}

/// A loaded model file: a single classifier or an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Base(BaseClassifier),
    Ensemble(Ensemble),
}

impl Classify for Model {
    fn labels(&self) -> &[DialectLabel] {
        match self {
            Model::Base(m) => m.labels(),
            Model::Ensemble(m) => m.labels(),
        }
    }

    fn predict_proba(&self, text: &str) -> Prediction {
        match self {
            Model::Base(m) => m.predict_proba(text),
            Model::Ensemble(m) => m.predict_proba(text),
        }
    }

    fn embed(&self, text: &str, mode: EmbeddingMode) -> Vec<f64> {
        match self {
            Model::Base(m) => m.embed(text, mode),
            Model::Ensemble(m) => m.embed(text, mode),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_takes_first_maximum() {
        assert_eq!(argmax(&[0.2, 0.9, 0.9]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn softmax_is_a_distribution() {
        let p = softmax(&[1000.0, 0.0, -1000.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let q = softmax(&[0.0, 0.0]);
        assert_eq!(q, vec![0.5, 0.5]);
    }
}
