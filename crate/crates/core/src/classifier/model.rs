use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::featurize::{featurize, l2_normalize, FeaturizerConfig, SparseVector};
use super::{softmax, ClassifierError, Classify, EmbeddingMode, Prediction};
use crate::corpus::CorpusRecord;
use crate::label::{self, DialectLabel};
use crate::seed;

/// Optimisation knobs shared by every base model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainMeta {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainMeta {
    fn default() -> Self {
        Self { epochs: 4, learning_rate: 0.5, weight_decay: 1e-4, batch_size: 16, seed: 1337 }
    }
}

/// Multinomial logistic regression over hashed n-gram features.
///
/// `weights` is class-major: row `c` occupies `weights[c * hash_dim..(c + 1) * hash_dim]`
/// and aligns with `labels[c]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseClassifier {
    pub featurizer: FeaturizerConfig,
    pub labels: Vec<DialectLabel>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub train_meta: TrainMeta,
}

/// Five featurizer/seed combinations standing in for diverse base models.
pub fn default_base_configs() -> Vec<(FeaturizerConfig, TrainMeta)> {
    let specs = [(1, 3, 16, false), (2, 4, 17, false), (1, 5, 16, true), (3, 5, 15, false), (2, 3, 14, true)];
    specs
        .iter()
        .enumerate()
        .map(|(i, &(lo, hi, bits, words))| {
            (
                FeaturizerConfig { ngram_min: lo, ngram_max: hi, hash_dim: 1 << bits, use_word_unigrams: words },
                TrainMeta { seed: 1337 + i as u64, ..TrainMeta::default() },
            )
        })
        .collect()
}

pub fn train(
    dataset: &[CorpusRecord],
    featurizer: &FeaturizerConfig,
    meta: &TrainMeta,
) -> Result<BaseClassifier, ClassifierError> {
    let labels = label::canonical_order(dataset.iter().map(|r| &r.label));
    train_with_labels(dataset, &labels, featurizer, meta)
}

/// Mini-batch gradient descent on softmax cross-entropy with L2 weight decay.
///
/// Deterministic for a given seed: the batch order comes from a seeded
/// shuffle and updates are applied in a fixed order.
pub fn train_with_labels(
    dataset: &[CorpusRecord],
    labels: &[DialectLabel],
    featurizer: &FeaturizerConfig,
    meta: &TrainMeta,
) -> Result<BaseClassifier, ClassifierError> {
    featurizer.validate().map_err(ClassifierError::InvalidFeaturizer)?;
    if labels.len() < 2 {
        return Err(ClassifierError::DegenerateData(format!("need at least 2 classes, got {}", labels.len())));
    }
    if meta.batch_size == 0 || !(meta.learning_rate > 0.0) || meta.weight_decay < 0.0 {
        return Err(ClassifierError::DegenerateData("invalid training hyperparameters".into()));
    }
    let mut examples: Vec<(usize, SparseVector)> = Vec::with_capacity(dataset.len());
    let mut counts = vec![0usize; labels.len()];
    for r in dataset {
        let c =
            labels.iter().position(|l| l == &r.label).ok_or_else(|| ClassifierError::UnknownLabel(r.label.clone()))?;
        counts[c] += 1;
        examples.push((c, l2_normalize(featurize(featurizer, r.text()))));
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(ClassifierError::DegenerateData(format!("class {} has no examples", labels[c])));
    }

    let n_classes = labels.len();
    let dim = featurizer.hash_dim;
    // true weights are `scale * v`; decay then only touches the scalar
    let mut v = vec![0.0f64; n_classes * dim];
    let mut scale = 1.0f64;
    let mut bias = vec![0.0f64; n_classes];
    let lr = meta.learning_rate;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = seed::rng(seed::derive(meta.seed, &[&"train"]));
    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(meta.batch_size);

    for _ in 0..meta.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(meta.batch_size) {
            let inv_b = 1.0 / batch.len() as f64;
            grads.clear();
            for &i in batch {
                let (class, x) = &examples[i];
                let logits = scores(&v, scale, &bias, dim, x);
                let mut g = softmax(&logits);
                g[*class] -= 1.0;
                grads.push(g);
            }
            for (&i, g) in batch.iter().zip(&grads) {
                let x = &examples[i].1;
                for (c, gc) in g.iter().enumerate() {
                    let step = lr * gc * inv_b;
                    bias[c] -= step;
                    let row = &mut v[c * dim..(c + 1) * dim];
                    let step = step / scale;
                    for &(j, xj) in x {
                        row[j as usize] -= step * xj;
                    }
                }
            }
            scale *= 1.0 - lr * meta.weight_decay;
            if scale < 1e-6 {
                v.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
        }
    }
    v.iter_mut().for_each(|w| *w *= scale);
    Ok(BaseClassifier {
        featurizer: featurizer.clone(),
        labels: labels.to_vec(),
        weights: v,
        bias,
        train_meta: meta.clone(),
    })
}

fn scores(v: &[f64], scale: f64, bias: &[f64], dim: usize, x: &SparseVector) -> Vec<f64> {
    bias.iter()
        .enumerate()
        .map(|(c, b)| {
            let row = &v[c * dim..(c + 1) * dim];
            b + scale * x.iter().map(|&(j, xj)| row[j as usize] * xj).sum::<f64>()
        })
        .collect()
}

impl BaseClassifier {
    /// Builds a classifier from explicit parameters.
    pub fn from_parts(
        featurizer: FeaturizerConfig,
        labels: Vec<DialectLabel>,
        weights: Vec<f64>,
        bias: Vec<f64>,
        train_meta: TrainMeta,
    ) -> Result<Self, ClassifierError> {
        featurizer.validate().map_err(ClassifierError::InvalidFeaturizer)?;
        if bias.len() != labels.len() || weights.len() != labels.len() * featurizer.hash_dim {
            return Err(ClassifierError::Format("weight/bias shape does not match label set".into()));
        }
        if weights.iter().chain(&bias).any(|w| !w.is_finite()) {
            return Err(ClassifierError::Format("non-finite parameter".into()));
        }
        Ok(Self { featurizer, labels, weights, bias, train_meta })
    }

    pub fn features(&self, text: &str) -> SparseVector {
        l2_normalize(featurize(&self.featurizer, text))
    }

    pub fn logits(&self, text: &str) -> Vec<f64> {
        scores(&self.weights, 1.0, &self.bias, self.featurizer.hash_dim, &self.features(text))
    }
}

impl Classify for BaseClassifier {
    fn labels(&self) -> &[DialectLabel] {
        &self.labels
    }

    fn predict_proba(&self, text: &str) -> Prediction {
        let logits = self.logits(text);
        Prediction::from_parts(&self.labels, softmax(&logits), logits)
    }

    fn embed(&self, text: &str, mode: EmbeddingMode) -> Vec<f64> {
        match mode {
            EmbeddingMode::Logit => self.logits(text),
            EmbeddingMode::Raw => {
                let mut dense = vec![0.0; self.featurizer.hash_dim];
                for (j, x) in self.features(text) {
                    dense[j as usize] = x;
                }
                dense
            }
        }
    }
}
