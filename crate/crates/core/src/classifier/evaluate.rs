use std::fmt::Write as _;

use serde::Serialize;

use super::{ClassifierError, Classify};
use crate::corpus::CorpusRecord;
use crate::label::DialectLabel;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub label: DialectLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// One-vs-rest metrics plus the confusion matrix (rows gold, columns predicted).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ClassificationReport {
    pub fn from_confusion(labels: &[DialectLabel], confusion: Vec<Vec<usize>>) -> Result<Self, ClassifierError> {
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(ClassifierError::EmptyEvalSet);
        }
        let k = labels.len();
        let per_class: Vec<ClassMetrics> = (0..k)
            .map(|c| {
                let tp = confusion[c][c];
                let support: usize = confusion[c].iter().sum();
                let predicted: usize = confusion.iter().map(|row| row[c]).sum();
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, support);
                let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
                ClassMetrics { label: labels[c].clone(), precision, recall, f1, support }
            })
            .collect();
        let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
        let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / k as f64;
        Ok(Self { per_class, accuracy: ratio(correct, total), macro_f1, confusion })
    }

    /// Builds the report from gold and predicted class indices.
    pub fn from_indices(labels: &[DialectLabel], gold: &[usize], predicted: &[usize]) -> Result<Self, ClassifierError> {
        let mut confusion = vec![vec![0usize; labels.len()]; labels.len()];
        for (&g, &p) in gold.iter().zip(predicted) {
            confusion[g][p] += 1;
        }
        Self::from_confusion(labels, confusion)
    }

    /// Per-class rows followed by the overall accuracy and macro-F1.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Class | Precision | Recall | F1-Score |\n|---|---:|---:|---:|\n");
        for m in &self.per_class {
            let _ = writeln!(out, "| {} | {:.4} | {:.4} | {:.4} |", m.label, m.precision, m.recall, m.f1);
        }
        let _ = write!(
            out,
            "\n| Metric | Score |\n|---|---:|\n| Accuracy | {:.4} |\n| Macro F1-Score | {:.4} |\n",
            self.accuracy, self.macro_f1
        );
        out
    }
}

pub fn evaluate_classifier(
    model: &dyn Classify,
    eval_set: &[CorpusRecord],
) -> Result<ClassificationReport, ClassifierError> {
    if eval_set.is_empty() {
        return Err(ClassifierError::EmptyEvalSet);
    }
    let labels = model.labels();
    let mut gold = Vec::with_capacity(eval_set.len());
    let mut predicted = Vec::with_capacity(eval_set.len());
    for r in eval_set {
        gold.push(model.label_index(&r.label).ok_or_else(|| ClassifierError::UnknownLabel(r.label.clone()))?);
        predicted.push(super::argmax(&model.predict_proba(r.text()).posterior));
    }
    ClassificationReport::from_indices(labels, &gold, &predicted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels2() -> Vec<DialectLabel> {
        vec!["A".into(), "B".into()]
    }

    #[test]
    fn hand_computed_confusion() {
        let r = ClassificationReport::from_confusion(&labels2(), vec![vec![9, 1], vec![2, 8]]).unwrap();
        assert!((r.per_class[0].precision - 9.0 / 11.0).abs() < 1e-15);
        assert!((r.per_class[0].recall - 0.9).abs() < 1e-15);
        assert!((r.per_class[1].precision - 8.0 / 9.0).abs() < 1e-15);
        assert!((r.per_class[1].recall - 0.8).abs() < 1e-15);
        assert!((r.accuracy - 0.85).abs() < 1e-15);
        let f0 = 2.0 * (9.0 / 11.0) * 0.9 / (9.0 / 11.0 + 0.9);
        let f1 = 2.0 * (8.0 / 9.0) * 0.8 / (8.0 / 9.0 + 0.8);
        assert!((r.macro_f1 - (f0 + f1) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictions() {
        let r = ClassificationReport::from_indices(&labels2(), &[0, 1, 1], &[0, 1, 1]).unwrap();
        assert_eq!((r.accuracy, r.macro_f1), (1.0, 1.0));
        assert!(r.per_class.iter().all(|m| m.precision == 1.0 && m.recall == 1.0 && m.f1 == 1.0));
    }

    #[test]
    fn empty_and_markdown() {
        assert!(matches!(ClassificationReport::from_indices(&labels2(), &[], &[]), Err(ClassifierError::EmptyEvalSet)));
        let md = ClassificationReport::from_indices(&labels2(), &[0, 1], &[0, 0]).unwrap().to_markdown();
        assert!(md.contains("| A | 0.5000 | 1.0000 | 0.6667 |"));
        assert!(md.contains("| Accuracy | 0.5000 |"));
    }
}
