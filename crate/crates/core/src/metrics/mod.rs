//! Dialect fidelity (DFS), target dialect ratio (TDR), BLEU and chrF++.

mod bleu;
mod chrf;
mod report;

use serde::{Deserialize, Serialize};

use crate::label::DialectLabel;

pub use bleu::{bleu, BleuConfig, BleuTokenizer};
pub use chrf::{chrf_pp, chrf_with, ChrfConfig};
pub use report::{MetricReport, MetricRow};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("cosine similarity undefined for a zero vector")]
    ZeroVector,
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("epsilon must be positive")]
    InvalidEpsilon,
    #[error("hypothesis set is empty")]
    EmptyHypothesisSet,
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch { hypotheses: usize, references: usize },
}

/// Default stabilizer added inside the DFS logarithm.
pub const DFS_EPSILON: f64 = 1e-6;

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, MetricsError> {
    if u.len() != v.len() {
        return Err(MetricsError::DimensionMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(MetricsError::ZeroVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Embeddings of hypothesis `h`, dialect reference `r` and standard source `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DfsInput {
    pub e_h: Vec<f64>,
    pub e_r: Vec<f64>,
    pub e_s: Vec<f64>,
    pub epsilon: f64,
}

impl DfsInput {
    pub fn new(e_h: Vec<f64>, e_r: Vec<f64>, e_s: Vec<f64>) -> Self {
        Self { e_h, e_r, e_s, epsilon: DFS_EPSILON }
    }
}

/// `ln((1 + cos(h, r) + eps) / (1 + cos(h, s) + eps))`.
///
/// Positive when the hypothesis sits closer to the dialect reference than to
/// the standard source. Computed as a difference of logarithms so that
/// swapping `r` and `s` negates the score exactly.
pub fn dfs(input: &DfsInput) -> Result<f64, MetricsError> {
    dfs_slices(&input.e_h, &input.e_r, &input.e_s, input.epsilon)
}

pub fn dfs_slices(e_h: &[f64], e_r: &[f64], e_s: &[f64], epsilon: f64) -> Result<f64, MetricsError> {
    if !(epsilon > 0.0) {
        return Err(MetricsError::InvalidEpsilon);
    }
    let toward_reference = 1.0 + cosine(e_h, e_r)? + epsilon;
    let toward_source = 1.0 + cosine(e_h, e_s)? + epsilon;
    Ok(toward_reference.ln() - toward_source.ln())
}

/// Fraction of predictions equal to the target dialect.
pub fn tdr(predictions: &[DialectLabel], target: &DialectLabel) -> Result<f64, MetricsError> {
    if predictions.is_empty() {
        return Err(MetricsError::EmptyHypothesisSet);
    }
    let hits = predictions.iter().filter(|p| *p == target).count();
    Ok(hits as f64 / predictions.len() as f64)
}

fn check_lengths(hypotheses: usize, references: usize) -> Result<(), MetricsError> {
    if hypotheses != references {
        return Err(MetricsError::LengthMismatch { hypotheses, references });
    }
    if hypotheses == 0 {
        return Err(MetricsError::EmptyHypothesisSet);
    }
    Ok(())
}
