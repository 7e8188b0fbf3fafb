//! Corpus curation: divergence filtering, class balancing, splits, salient
//! dialect terms and hard-negative `Unknown` synthesis.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::jsonl::{self, JsonlError};
use crate::label::{self, DialectLabel};
use crate::seed;

/// One standard/dialect sentence pair.
///
/// For `Standard` records `dialect` repeats the standard sentence; for
/// `Unknown` records it holds the mixed-dialect sentence. The classifier
/// always reads the `dialect` side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub standard: String,
    pub dialect: String,
    pub label: DialectLabel,
}

impl CorpusRecord {
    pub fn new(
        id: impl Into<String>,
        standard: impl Into<String>,
        dialect: impl Into<String>,
        label: DialectLabel,
    ) -> Self {
        Self { id: id.into(), standard: standard.into(), dialect: dialect.into(), label }
    }

    /// Text seen by the classifier.
    pub fn text(&self) -> &str {
        &self.dialect
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("insufficient data for class {label}: {what} needs {needed}, found {available}")]
    InsufficientData { label: String, what: &'static str, needed: usize, available: usize },
    #[error("class {0} has no training records")]
    UnknownClass(DialectLabel),
    #[error("duplicate record id {0}")]
    DuplicateId(String),
    #[error("invalid curation config: {0}")]
    InvalidConfig(String),
    #[error("record {0}: dialect-class records need non-empty standard and dialect text")]
    EmptyText(String),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationConfig {
    pub per_class_cap: usize,
    pub divergence_threshold: f64,
    pub train_fraction: f64,
    pub test_pair_count: usize,
    pub min_test_chars: usize,
    pub seed: u64,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            per_class_cap: 10_000,
            divergence_threshold: 0.1,
            train_fraction: 0.9,
            test_pair_count: 300,
            min_test_chars: 30,
            seed: 1337,
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: &str| Err(CorpusError::InvalidConfig(m.to_owned()));
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie strictly between 0 and 1");
        }
        if !(0.0..=1.0).contains(&self.divergence_threshold) {
            return bad("divergence_threshold must lie in [0, 1]");
        }
        if self.per_class_cap == 0 || self.test_pair_count == 0 {
            return bad("per_class_cap and test_pair_count must be positive");
        }
        Ok(())
    }
}

/// Output of [`curate`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SplitDataset {
    pub train: Vec<CorpusRecord>,
    pub eval: Vec<CorpusRecord>,
    pub icl_pool: Vec<CorpusRecord>,
    pub test: Vec<CorpusRecord>,
}

impl SplitDataset {
    pub const FILES: [&'static str; 4] = ["train.jsonl", "eval.jsonl", "icl_pool.jsonl", "test.jsonl"];

    pub fn write_dir(&self, dir: &Path) -> Result<(), CorpusError> {
        let parts = [&self.train, &self.eval, &self.icl_pool, &self.test];
        for (name, records) in Self::FILES.iter().zip(parts) {
            jsonl::write(&dir.join(name), records)?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self, CorpusError> {
        Ok(Self {
            train: read_records(&dir.join("train.jsonl"))?,
            eval: read_records(&dir.join("eval.jsonl"))?,
            icl_pool: read_records(&dir.join("icl_pool.jsonl"))?,
            test: read_records(&dir.join("test.jsonl"))?,
        })
    }
}

pub fn read_records(path: &Path) -> Result<Vec<CorpusRecord>, CorpusError> {
    Ok(jsonl::read(path)?)
}

pub fn write_records(path: &Path, records: &[CorpusRecord]) -> Result<(), CorpusError> {
    Ok(jsonl::write(path, records)?)
}

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Yujian–Bo normalized edit distance `2d / (|a| + |b| + d)`, in `[0, 1]`.
pub fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    let d = levenshtein(a, b);
    if d == 0 {
        return 0.0;
    }
    let len = a.chars().count() + b.chars().count();
    2.0 * d as f64 / (len + d) as f64
}

fn check_unique_ids(records: &[CorpusRecord]) -> Result<(), CorpusError> {
    let mut seen = HashSet::with_capacity(records.len());
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(CorpusError::DuplicateId(r.id.clone()));
        }
    }
    Ok(())
}

/// Filters, balances and splits labeled records.
///
/// Per class, after sorting by id and a seeded shuffle:
/// - dialect classes drop pairs whose normalized edit distance is below the
///   threshold, then reserve `test_pair_count` records with dialect text of at
///   least `min_test_chars` characters as the test set;
/// - the next `per_class_cap` records are retained and split into train/eval;
/// - retained dialect-class records form the in-context example pool.
///
/// The result does not depend on input order.
pub fn curate(records: &[CorpusRecord], config: &CurationConfig) -> Result<SplitDataset, CorpusError> {
    config.validate()?;
    check_unique_ids(records)?;

    let mut by_class: BTreeMap<DialectLabel, Vec<&CorpusRecord>> = BTreeMap::new();
    for r in records {
        if r.label.is_dialect() && (r.standard.is_empty() || r.dialect.is_empty()) {
            return Err(CorpusError::EmptyText(r.id.clone()));
        }
        by_class.entry(r.label.clone()).or_default().push(r);
    }

    let mut out = SplitDataset::default();
    for class in label::canonical_order(by_class.keys()) {
        let mut pool = by_class.remove(&class).unwrap_or_default();
        pool.sort_by(|a, b| a.id.cmp(&b.id));
        if class.is_dialect() {
            pool.retain(|r| normalized_levenshtein(&r.standard, &r.dialect) >= config.divergence_threshold);
        }
        let mut rng = seed::rng(seed::derive(config.seed, &[&"curate", &class.as_str()]));
        pool.shuffle(&mut rng);

        if class.is_dialect() {
            let mut test_ids = HashSet::new();
            for r in pool.iter().filter(|r| r.dialect.chars().count() >= config.min_test_chars) {
                if test_ids.len() == config.test_pair_count {
                    break;
                }
                test_ids.insert(r.id.as_str());
                out.test.push((*r).clone());
            }
            if test_ids.len() < config.test_pair_count {
                return Err(CorpusError::InsufficientData {
                    label: class.to_string(),
                    what: "test set",
                    needed: config.test_pair_count,
                    available: test_ids.len(),
                });
            }
            pool.retain(|r| !test_ids.contains(r.id.as_str()));
        }

        if pool.len() < config.per_class_cap {
            return Err(CorpusError::InsufficientData {
                label: class.to_string(),
                what: "class cap",
                needed: config.per_class_cap,
                available: pool.len(),
            });
        }
        pool.truncate(config.per_class_cap);
        let n_train = ((pool.len() as f64) * config.train_fraction).round() as usize;
        let n_train = n_train.clamp(1, pool.len().saturating_sub(1).max(1));
        out.train.extend(pool[..n_train].iter().map(|r| (*r).clone()));
        out.eval.extend(pool[n_train..].iter().map(|r| (*r).clone()));
        if class.is_dialect() {
            out.icl_pool.extend(pool.iter().map(|r| (*r).clone()));
        }
    }
    Ok(out)
}

/// How documents are split into terms for TF-IDF.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "n")]
pub enum TermTokenizer {
    Whitespace,
    /// Character n-grams of the given order over each whitespace token.
    CharNgram(usize),
}

impl TermTokenizer {
    pub fn terms(self, text: &str) -> Vec<String> {
        match self {
            TermTokenizer::Whitespace => text.split_whitespace().map(str::to_owned).collect(),
            TermTokenizer::CharNgram(n) => {
                let n = n.max(1);
                let mut out = Vec::new();
                for tok in text.split_whitespace() {
                    let chars: Vec<char> = tok.chars().collect();
                    if chars.len() < n {
                        out.push(tok.to_owned());
                        continue;
                    }
                    out.extend(chars.windows(n).map(|w| w.iter().collect::<String>()));
                }
                out
            }
        }
    }
}

/// Ranks terms of `class` by TF-IDF, treating each class's concatenated
/// (dialect-side) text as a single document.
///
/// `tf` is the relative term frequency within the class document and
/// `idf = ln(N / df)` over the `N` class documents. Descending score, ties
/// broken lexicographically.
pub fn extract_salient_terms(
    train: &[CorpusRecord],
    class: &DialectLabel,
    top_n: usize,
    tokenizer: TermTokenizer,
) -> Result<Vec<(String, f64)>, CorpusError> {
    let mut docs: BTreeMap<&DialectLabel, BTreeMap<String, usize>> = BTreeMap::new();
    for r in train {
        let doc = docs.entry(&r.label).or_default();
        for t in tokenizer.terms(r.text()) {
            *doc.entry(t).or_insert(0) += 1;
        }
    }
    let target = docs.get(class).ok_or_else(|| CorpusError::UnknownClass(class.clone()))?;
    if top_n == 0 {
        return Ok(Vec::new());
    }
    let n_docs = docs.len() as f64;
    let total: usize = target.values().sum();
    let mut scored: Vec<(String, f64)> = target
        .iter()
        .map(|(term, &count)| {
            let df = docs.values().filter(|d| d.contains_key(term)).count() as f64;
            let tf = count as f64 / total as f64;
            (term.clone(), tf * (n_docs / df).ln())
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(top_n);
    Ok(scored)
}

/// Salient terms kept per dialect class when splicing `Unknown` sentences.
pub const UNKNOWN_TERMS_PER_CLASS: usize = 20;

/// Builds mixed-dialect hard negatives.
///
/// Each output takes a `Standard` carrier sentence and splices in one salient
/// term from each of two or three distinct dialect classes at seeded token
/// positions. Outputs are labeled `Unknown`.
pub fn synthesize_unknown(train: &[CorpusRecord], count: usize, seed: u64) -> Result<Vec<CorpusRecord>, CorpusError> {
    let classes: BTreeSet<&DialectLabel> = train.iter().map(|r| &r.label).filter(|l| l.is_dialect()).collect();
    let mut salient: Vec<(DialectLabel, Vec<String>)> = Vec::new();
    for class in &classes {
        let terms: Vec<String> =
            extract_salient_terms(train, class, UNKNOWN_TERMS_PER_CLASS, TermTokenizer::Whitespace)?
                .into_iter()
                .filter(|(_, score)| *score > 0.0)
                .map(|(t, _)| t)
                .collect();
        if !terms.is_empty() {
            salient.push(((*class).clone(), terms));
        }
    }
    if salient.len() < 2 {
        return Err(CorpusError::InsufficientData {
            label: label::UNKNOWN.to_owned(),
            what: "dialect classes with salient terms",
            needed: 2,
            available: salient.len(),
        });
    }
    let mut carriers: Vec<&CorpusRecord> = train.iter().filter(|r| r.label.is_standard()).collect();
    if carriers.is_empty() {
        return Err(CorpusError::InsufficientData {
            label: label::STANDARD.to_owned(),
            what: "carrier sentences",
            needed: 1,
            available: 0,
        });
    }
    carriers.sort_by(|a, b| a.id.cmp(&b.id));

    let mut rng = seed::rng(seed::derive(seed, &[&"synthesize_unknown"]));
    let mut out = Vec::with_capacity(count);
    let mut order: Vec<usize> = (0..salient.len()).collect();
    for i in 0..count {
        let carrier = carriers[rng.random_range(0..carriers.len())];
        let mixed_classes = rng.random_range(2..=salient.len().min(3));
        order.shuffle(&mut rng);
        let mut tokens: Vec<String> = carrier.standard.split_whitespace().map(str::to_owned).collect();
        for &c in &order[..mixed_classes] {
            let terms = &salient[c].1;
            let term = terms[rng.random_range(0..terms.len())].clone();
            let pos = rng.random_range(0..=tokens.len());
            tokens.insert(pos, term);
        }
        out.push(CorpusRecord::new(
            format!("unknown-synth-{i:06}"),
            carrier.standard.clone(),
            tokens.join(" "),
            DialectLabel::unknown(),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, std: &str, dia: &str, label: &str) -> CorpusRecord {
        CorpusRecord::new(id, std, dia, DialectLabel::new(label))
    }

    // independent exhaustive-recursion oracle
    fn lev_oracle(a: &[char], b: &[char], memo: &mut BTreeMap<(usize, usize), usize>) -> usize {
        if a.is_empty() {
            return b.len();
        }
        if b.is_empty() {
            return a.len();
        }
        if let Some(&v) = memo.get(&(a.len(), b.len())) {
            return v;
        }
        let sub = lev_oracle(&a[1..], &b[1..], memo) + usize::from(a[0] != b[0]);
        let del = lev_oracle(&a[1..], b, memo) + 1;
        let ins = lev_oracle(a, &b[1..], memo) + 1;
        let v = sub.min(del).min(ins);
        memo.insert((a.len(), b.len()), v);
        v
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein("", ""), 0);
        assert_eq!(levenshtein("abc", "abd"), 1);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        let (a, b): (Vec<char>, Vec<char>) = ("kitten".chars().collect(), "sitting".chars().collect());
        assert_eq!(lev_oracle(&a, &b, &mut BTreeMap::new()), 3);
        // scalar values, not bytes
        assert_eq!(levenshtein("없으니까", "없으니깐"), 1);
    }

    #[test]
    fn normalized_examples() {
        assert_eq!(normalized_levenshtein("abc", "abc"), 0.0);
        assert!((normalized_levenshtein("abc", "abd") - 2.0 / 7.0).abs() < 1e-15);
        assert_eq!(normalized_levenshtein("a", ""), 1.0);
        assert_eq!(normalized_levenshtein("", ""), 0.0);
    }

    fn dialect_pool(label: &str, n: usize) -> Vec<CorpusRecord> {
        (0..n)
            .map(|i| {
                rec(
                    &format!("{label}-{i:05}"),
                    &format!("standard sentence number {i} goes here"),
                    &format!("dialect sentence number {i} goes there xq"),
                    label,
                )
            })
            .collect()
    }

    #[test]
    fn curate_caps_and_splits_nine_to_one() {
        let records: Vec<CorpusRecord> = (0..12_000)
            .map(|i| rec(&format!("s{i:05}"), "a b c", "a b c", label::STANDARD))
            .chain(dialect_pool("Jeju", 10_300))
            .collect();
        let cfg = CurationConfig::default();
        let split = curate(&records, &cfg).unwrap();
        let std_train = split.train.iter().filter(|r| r.label.is_standard()).count();
        let std_eval = split.eval.iter().filter(|r| r.label.is_standard()).count();
        assert_eq!((std_train, std_eval), (9_000, 1_000));
        assert_eq!(split.test.len(), 300);
        assert_eq!(split.icl_pool.len(), 10_000);
    }

    #[test]
    fn curate_drops_low_divergence_pairs() {
        // one substitution in 40 chars: 2/(81) < 0.1
        let near = rec("x", &"a".repeat(40), &format!("{}b", "a".repeat(39)), "Jeju");
        assert!(normalized_levenshtein(&near.standard, &near.dialect) < 0.1);
        let mut records = dialect_pool("Jeju", 12);
        records.push(near);
        let cfg = CurationConfig { per_class_cap: 10, test_pair_count: 2, ..Default::default() };
        let split = curate(&records, &cfg).unwrap();
        let all: Vec<&CorpusRecord> = split.train.iter().chain(&split.eval).chain(&split.test).collect();
        assert!(all.iter().all(|r| r.id != "x"));
        assert_eq!(split.train.len() + split.eval.len(), 10);
    }

    #[test]
    fn curate_is_deterministic_and_order_invariant() {
        let mut records = dialect_pool("Jeju", 40);
        records.extend(dialect_pool("Jeolla", 40));
        let cfg = CurationConfig { per_class_cap: 20, test_pair_count: 5, seed: 9, ..Default::default() };
        let a = curate(&records, &cfg).unwrap();
        records.reverse();
        let b = curate(&records, &cfg).unwrap();
        assert_eq!(a, b);
        let ids: HashSet<&str> = a.icl_pool.iter().chain(&a.train).map(|r| r.id.as_str()).collect();
        assert!(a.test.iter().all(|r| !ids.contains(r.id.as_str())));
    }

    #[test]
    fn curate_reports_insufficient_data() {
        let records = dialect_pool("Jeju", 10);
        let cfg = CurationConfig { per_class_cap: 10, test_pair_count: 2, ..Default::default() };
        match curate(&records, &cfg) {
            Err(CorpusError::InsufficientData { what: "class cap", needed: 10, available: 8, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let short: Vec<CorpusRecord> = (0..5).map(|i| rec(&format!("j{i}"), "aaaa", "bbbb", "Jeju")).collect();
        let cfg = CurationConfig { per_class_cap: 1, test_pair_count: 1, ..Default::default() };
        assert!(matches!(curate(&short, &cfg), Err(CorpusError::InsufficientData { what: "test set", .. })));
    }

    #[test]
    fn curate_rejects_duplicates_and_bad_config() {
        let records = vec![rec("a", "x y", "p q", "Jeju"), rec("a", "x y", "p q", "Jeju")];
        assert!(matches!(curate(&records, &CurationConfig::default()), Err(CorpusError::DuplicateId(_))));
        let cfg = CurationConfig { train_fraction: 1.0, ..Default::default() };
        assert!(matches!(curate(&[], &cfg), Err(CorpusError::InvalidConfig(_))));
    }

    fn toy_three_class() -> Vec<CorpusRecord> {
        vec![
            rec("a1", "", "shared alpha common", "A"),
            rec("a2", "", "alpha shared", "A"),
            rec("b1", "", "shared beta common", "B"),
            rec("b2", "", "beta beta", "B"),
            rec("c1", "", "shared gamma", "C"),
            rec("c2", "", "common gamma", "C"),
        ]
    }

    #[test]
    fn salient_terms_hand_computed() {
        // Class A doc: shared×2 alpha×2 common×1 (5 tokens), N = 3 docs.
        // alpha: tf 2/5, df 1 -> 0.4 ln 3; common: 1/5, df 3 -> 0; shared: df 3 -> 0.
        let train = toy_three_class();
        let terms = extract_salient_terms(&train, &"A".into(), 3, TermTokenizer::Whitespace).unwrap();
        assert_eq!(terms[0].0, "alpha");
        assert!((terms[0].1 - 0.4 * 3f64.ln()).abs() < 1e-12);
        // zero-score ties break lexicographically
        assert_eq!(terms[1].0, "common");
        assert_eq!(terms[2].0, "shared");
        for (class, planted) in [("B", "beta"), ("C", "gamma")] {
            let t = extract_salient_terms(&train, &class.into(), 1, TermTokenizer::Whitespace).unwrap();
            assert_eq!(t[0].0, planted);
        }
        assert!(extract_salient_terms(&train, &"A".into(), 0, TermTokenizer::Whitespace).unwrap().is_empty());
        assert!(matches!(
            extract_salient_terms(&train, &"Z".into(), 3, TermTokenizer::Whitespace),
            Err(CorpusError::UnknownClass(_))
        ));
    }

    #[test]
    fn char_ngram_tokenizer() {
        assert_eq!(TermTokenizer::CharNgram(2).terms("abc d"), ["ab", "bc", "d"]);
    }

    #[test]
    fn unknown_synthesis_mixes_two_dialects() {
        let mut train = toy_three_class();
        train.push(rec("s1", "plain words here", "plain words here", label::STANDARD));
        train.push(rec("s2", "more plain words", "more plain words", label::STANDARD));
        let out = synthesize_unknown(&train, 50, 3).unwrap();
        assert_eq!(out.len(), 50);
        let salient: Vec<(DialectLabel, HashSet<String>)> = ["A", "B", "C"]
            .iter()
            .map(|c| {
                let l = DialectLabel::new(*c);
                let terms = extract_salient_terms(&train, &l, UNKNOWN_TERMS_PER_CLASS, TermTokenizer::Whitespace)
                    .unwrap()
                    .into_iter()
                    .filter(|t| t.1 > 0.0)
                    .map(|t| t.0)
                    .collect();
                (l, terms)
            })
            .collect();
        for r in &out {
            assert!(r.label.is_unknown());
            let tokens: HashSet<&str> = r.dialect.split_whitespace().collect();
            let hit = salient.iter().filter(|(_, t)| t.iter().any(|w| tokens.contains(w.as_str()))).count();
            assert!(hit >= 2, "{}", r.dialect);
        }
        assert_eq!(out, synthesize_unknown(&train, 50, 3).unwrap());
        let ids: HashSet<&str> = out.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids.len(), out.len());
    }

    #[test]
    fn unknown_synthesis_needs_two_dialects() {
        let train = vec![rec("a", "", "alpha", "A"), rec("s", "x", "x", label::STANDARD)];
        assert!(matches!(synthesize_unknown(&train, 5, 0), Err(CorpusError::InsufficientData { .. })));
    }
}
