use serde::Serialize;

use super::evaluate::ClassificationReport;
use super::model::BaseClassifier;
use super::{ClassifierError, Classify, EmbeddingMode, Prediction};
use crate::corpus::CorpusRecord;
use crate::label::DialectLabel;

/// Upper bound on members for exhaustive subset search.
pub const MAX_SEARCH_MEMBERS: usize = 12;

/// Posterior-averaging ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    members: Vec<BaseClassifier>,
}

impl Ensemble {
    pub fn new(members: Vec<BaseClassifier>) -> Result<Self, ClassifierError> {
        let first = members.first().ok_or(ClassifierError::MemberCount { got: 0, max: usize::MAX })?;
        if members.iter().any(|m| m.labels != first.labels) {
            return Err(ClassifierError::LabelSetMismatch);
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[BaseClassifier] {
        &self.members
    }

    pub fn into_members(self) -> Vec<BaseClassifier> {
        self.members
    }
}

fn mean(rows: impl Iterator<Item = Vec<f64>>, width: usize) -> Vec<f64> {
    let mut acc = vec![0.0; width];
    let mut n = 0usize;
    for row in rows {
        for (a, x) in acc.iter_mut().zip(row) {
            *a += x;
        }
        n += 1;
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    acc
}

impl Classify for Ensemble {
    fn labels(&self) -> &[DialectLabel] {
        &self.members[0].labels
    }

    /// Arithmetic mean of member posteriors (and of member logits).
    fn predict_proba(&self, text: &str) -> Prediction {
        let k = self.labels().len();
        let preds: Vec<Prediction> = self.members.iter().map(|m| m.predict_proba(text)).collect();
        let posterior = mean(preds.iter().map(|p| p.posterior.clone()), k);
        let logits = mean(preds.into_iter().map(|p| p.logits), k);
        Prediction::from_parts(self.labels(), posterior, logits)
    }

    /// Logit mode averages member logits; raw mode concatenates member feature
    /// vectors scaled by `1/sqrt(m)` so the result stays unit-norm.
    fn embed(&self, text: &str, mode: EmbeddingMode) -> Vec<f64> {
        match mode {
            EmbeddingMode::Logit => mean(self.members.iter().map(|m| m.logits(text)), self.labels().len()),
            EmbeddingMode::Raw => {
                let s = 1.0 / (self.members.len() as f64).sqrt();
                self.members.iter().flat_map(|m| m.embed(text, EmbeddingMode::Raw)).map(|x| x * s).collect()
            }
        }
    }
}

/// One evaluated member subset (indices into the member list, ascending).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsetScore {
    pub members: Vec<usize>,
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Scores every non-empty subset of `members` as a posterior-averaging
/// ensemble on `eval_set`.
///
/// Ranked by accuracy, then macro-F1 (both descending), then smaller subset,
/// then lexicographic member indices.
pub fn ensemble_search(
    members: &[BaseClassifier],
    eval_set: &[CorpusRecord],
) -> Result<Vec<SubsetScore>, ClassifierError> {
    let m = members.len();
    if m == 0 || m > MAX_SEARCH_MEMBERS {
        return Err(ClassifierError::MemberCount { got: m, max: MAX_SEARCH_MEMBERS });
    }
    if eval_set.is_empty() {
        return Err(ClassifierError::EmptyEvalSet);
    }
    let labels = &members[0].labels;
    if members.iter().any(|b| &b.labels != labels) {
        return Err(ClassifierError::LabelSetMismatch);
    }
    let k = labels.len();
    let gold: Vec<usize> = eval_set
        .iter()
        .map(|r| {
            labels.iter().position(|l| l == &r.label).ok_or_else(|| ClassifierError::UnknownLabel(r.label.clone()))
        })
        .collect::<Result<_, _>>()?;
    // posteriors[member][item]
    let posteriors: Vec<Vec<Vec<f64>>> =
        members.iter().map(|b| eval_set.iter().map(|r| b.predict_proba(r.text()).posterior).collect()).collect();

    let mut results = Vec::with_capacity((1 << m) - 1);
    for mask in 1u32..(1 << m) {
        let subset: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let predicted: Vec<usize> = (0..eval_set.len())
            .map(|item| {
                let avg = mean(subset.iter().map(|&s| posteriors[s][item].clone()), k);
                super::argmax(&avg)
            })
            .collect();
        let report = ClassificationReport::from_indices(labels, &gold, &predicted)?;
        results.push(SubsetScore { members: subset, accuracy: report.accuracy, macro_f1: report.macro_f1 });
    }
    results.sort_by(|a, b| {
        b.accuracy
            .total_cmp(&a.accuracy)
            .then(b.macro_f1.total_cmp(&a.macro_f1))
            .then(a.members.len().cmp(&b.members.len()))
            .then_with(|| a.members.cmp(&b.members))
    });
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{FeaturizerConfig, TrainMeta};

    fn hand_model(bias: [f64; 2]) -> BaseClassifier {
        let f = FeaturizerConfig { ngram_min: 1, ngram_max: 1, hash_dim: 2, use_word_unigrams: false };
        BaseClassifier::from_parts(f, vec!["A".into(), "B".into()], vec![0.0; 4], bias.to_vec(), TrainMeta::default())
            .unwrap()
    }

    #[test]
    fn two_member_mean_by_hand() {
        // empty text: logits are the biases
        // member 1: softmax(0, ln 3) = (1/4, 3/4); member 2: softmax(ln 4, 0) = (4/5, 1/5)
        let e = Ensemble::new(vec![hand_model([0.0, 3f64.ln()]), hand_model([4f64.ln(), 0.0])]).unwrap();
        let p = e.predict_proba("");
        let expected = [(0.25 + 0.8) / 2.0, (0.75 + 0.2) / 2.0];
        assert!((p.posterior[0] - expected[0]).abs() < 1e-12);
        assert!((p.posterior[1] - expected[1]).abs() < 1e-12);
        assert_eq!(p.label.as_str(), "A");
        assert!((p.logits[0] - 4f64.ln() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_member_changes_nothing() {
        let m = hand_model([0.3, -0.2]);
        let single = m.predict_proba("ab");
        let double = Ensemble::new(vec![m.clone(), m]).unwrap().predict_proba("ab");
        for (a, b) in single.posterior.iter().zip(&double.posterior) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(single.label, double.label);
    }

    #[test]
    fn mismatched_labels_rejected() {
        let mut other = hand_model([0.0, 0.0]);
        other.labels = vec!["A".into(), "C".into()];
        assert!(matches!(Ensemble::new(vec![hand_model([0.0, 0.0]), other]), Err(ClassifierError::LabelSetMismatch)));
        assert!(Ensemble::new(vec![]).is_err());
    }

    #[test]
    fn single_member_search_has_one_entry() {
        let eval = vec![CorpusRecord::new("x", "", "a", "A".into())];
        let r = ensemble_search(&[hand_model([1.0, 0.0])], &eval).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].members, vec![0]);
        assert_eq!(r[0].accuracy, 1.0);
    }
}
