//! BM25 index over the in-context example pool.
//!
//! Documents are keyed on the standard-side sentence of each pair.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusRecord;

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("example pool is empty")]
    EmptyPool,
    #[error("duplicate document id {0}")]
    DuplicateId(String),
    #[error("invalid BM25 parameters k1={k1}, b={b}")]
    InvalidParams { k1: f64, b: f64 },
    #[error("index file: {0}")]
    Io(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalTokenizer {
    #[default]
    Whitespace,
    /// Overlapping character bigrams within each whitespace token, for
    /// scripts that use few spaces.
    CharBigram,
}

impl RetrievalTokenizer {
    pub fn tokens(self, text: &str) -> Vec<String> {
        match self {
            RetrievalTokenizer::Whitespace => text.split_whitespace().map(str::to_owned).collect(),
            RetrievalTokenizer::CharBigram => {
                let mut out = Vec::new();
                for tok in text.split_whitespace() {
                    let chars: Vec<char> = tok.chars().collect();
                    if chars.len() == 1 {
                        out.push(tok.to_owned());
                    }
                    out.extend(chars.windows(2).map(|w| w.iter().collect::<String>()));
                }
                out
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    pub tokenizer: RetrievalTokenizer,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75, tokenizer: RetrievalTokenizer::Whitespace }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Inverted index. Documents are stored sorted by record id, so internal
/// document numbers order the same way as ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bm25Index {
    pub params: Bm25Params,
    pub postings: BTreeMap<String, Vec<Posting>>,
    pub doc_lengths: Vec<u32>,
    pub avg_doc_length: f64,
    pub docs: Vec<CorpusRecord>,
}

/// A retrieved pair and its score.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredDoc<'a> {
    pub record: &'a CorpusRecord,
    pub score: f64,
}

/// Okapi IDF with +0.5 smoothing; the `+ 1` inside the log keeps it positive.
pub fn idf(n_docs: usize, df: usize) -> f64 {
    let (n, df) = (n_docs as f64, df as f64);
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

/// Term weight for one document.
pub fn term_score(idf: f64, tf: f64, doc_len: f64, avg_len: f64, k1: f64, b: f64) -> f64 {
    idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * doc_len / avg_len))
}

impl Bm25Index {
    pub fn build(pool: &[CorpusRecord], params: Bm25Params) -> Result<Self, RetrievalError> {
        if !(params.k1 > 0.0) || !(0.0..=1.0).contains(&params.b) {
            return Err(RetrievalError::InvalidParams { k1: params.k1, b: params.b });
        }
        if pool.is_empty() {
            return Err(RetrievalError::EmptyPool);
        }
        let mut docs = pool.to_vec();
        docs.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = docs.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(RetrievalError::DuplicateId(w[0].id.clone()));
        }
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(docs.len());
        for (i, doc) in docs.iter().enumerate() {
            let tokens = params.tokenizer.tokens(&doc.standard);
            doc_lengths.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_insert(0) += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push(Posting { doc: i as u32, tf: count });
            }
        }
        let avg_doc_length = doc_lengths.iter().map(|&l| f64::from(l)).sum::<f64>() / docs.len() as f64;
        Ok(Self { params, postings, doc_lengths, avg_doc_length, docs })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Top `k` documents for `query`, by descending score then ascending id.
    ///
    /// Each distinct query term contributes once. Only documents sharing at
    /// least one term with the query are returned.
    pub fn top_k(&self, query: &str, k: usize) -> Vec<ScoredDoc<'_>> {
        let terms: BTreeSet<String> = self.params.tokenizer.tokens(query).into_iter().collect();
        let n = self.docs.len();
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in &terms {
            let Some(list) = self.postings.get(term) else { continue };
            let w = idf(n, list.len());
            for p in list {
                let dl = f64::from(self.doc_lengths[p.doc as usize]);
                *scores.entry(p.doc).or_insert(0.0) +=
                    term_score(w, f64::from(p.tf), dl, self.avg_doc_length, self.params.k1, self.params.b);
            }
        }
        let mut ranked: Vec<(u32, f64)> = scores.into_iter().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked.into_iter().map(|(d, score)| ScoredDoc { record: &self.docs[d as usize], score }).collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let json = serde_json::to_string(self).map_err(|e| RetrievalError::Io(e.to_string()))?;
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| RetrievalError::Io(e.to_string()))?;
        }
        std::fs::write(path, json).map_err(|e| RetrievalError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let text = std::fs::read_to_string(path).map_err(|e| RetrievalError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| RetrievalError::Io(e.to_string()))
    }
}
