#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Mutex;

use dialect_refine::classifier::{softmax, Classify, EmbeddingMode, Prediction};
use dialect_refine::llm::{Backend, BackendError, GenerationRequest};
use dialect_refine::{CorpusRecord, DialectLabel};

pub fn labels(names: &[&str]) -> Vec<DialectLabel> {
    names.iter().map(|s| DialectLabel::new(*s)).collect()
}

/// Full-matrix Wagner–Fischer over chars.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

pub fn normalized_oracle(a: &str, b: &str) -> f64 {
    let d = edit_distance(a, b);
    if d == 0 {
        return 0.0;
    }
    let (la, lb) = (a.chars().count(), b.chars().count());
    2.0 * d as f64 / (la + lb + d) as f64
}

/// Every string over `alphabet` of length `0..=max_len`.
pub fn all_strings(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        layer = layer.iter().flat_map(|s| alphabet.iter().map(move |c| format!("{s}{c}"))).collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// Scores every document directly from its token list: (id, score), ranked.
pub fn bm25_full_scan(docs: &[CorpusRecord], query: &str, k1: f64, b: f64, k: usize) -> Vec<(String, f64)> {
    let mut docs: Vec<&CorpusRecord> = docs.iter().collect();
    docs.sort_by(|x, y| x.id.cmp(&y.id));
    let tokens: Vec<Vec<&str>> = docs.iter().map(|d| d.standard.split_whitespace().collect()).collect();
    let n = docs.len() as f64;
    let avg = tokens.iter().map(|t| t.len() as f64).sum::<f64>() / n;
    let terms: BTreeSet<&str> = query.split_whitespace().collect();
    let mut scored: Vec<(usize, f64)> = Vec::new();
    for (i, toks) in tokens.iter().enumerate() {
        let mut score = 0.0;
        let mut hit = false;
        for term in &terms {
            let tf = toks.iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            hit = true;
            let df = tokens.iter().filter(|t| t.contains(term)).count() as f64;
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            let dl = toks.len() as f64;
            score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avg));
        }
        if hit {
            scored.push((i, score));
        }
    }
    scored.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    scored.into_iter().take(k).map(|(i, s)| (docs[i].id.clone(), s)).collect()
}

/// Labels a text by the first label name it contains, else by `fallback`.
pub struct KeywordClassifier {
    pub labels: Vec<DialectLabel>,
    pub fallback: usize,
}

impl Classify for KeywordClassifier {
    fn labels(&self) -> &[DialectLabel] {
        &self.labels
    }
    fn predict_proba(&self, text: &str) -> Prediction {
        let i = self.labels.iter().position(|l| text.contains(l.as_str())).unwrap_or(self.fallback);
        let mut logits = vec![0.0; self.labels.len()];
        logits[i] = 2.0;
        Prediction::from_parts(&self.labels, softmax(&logits), logits)
    }
    fn embed(&self, text: &str, _: EmbeddingMode) -> Vec<f64> {
        let mut v = self.predict_proba(text).logits;
        v.push(1.0);
        v
    }
}

/// Posteriors read from a lookup table keyed by text.
pub struct TableClassifier {
    pub labels: Vec<DialectLabel>,
    pub table: Vec<(String, Vec<f64>)>,
}

impl Classify for TableClassifier {
    fn labels(&self) -> &[DialectLabel] {
        &self.labels
    }
    fn predict_proba(&self, text: &str) -> Prediction {
        let (_, p) = self.table.iter().find(|(t, _)| t == text).expect("text in table");
        Prediction::from_parts(&self.labels, p.clone(), p.iter().map(|x| x.ln()).collect())
    }
    fn embed(&self, text: &str, _: EmbeddingMode) -> Vec<f64> {
        self.predict_proba(text).posterior
    }
}

/// Replays one output per attempt (the last entry repeats) and records requests.
pub struct ScriptBackend {
    pub script: Vec<String>,
    pub seen: Mutex<Vec<GenerationRequest>>,
}

impl ScriptBackend {
    pub fn new<S: AsRef<str>>(script: &[S]) -> Self {
        Self { script: script.iter().map(|s| s.as_ref().to_owned()).collect(), seen: Mutex::new(Vec::new()) }
    }

    pub fn requests(&self) -> Vec<GenerationRequest> {
        self.seen.lock().unwrap().clone()
    }
}

impl Backend for ScriptBackend {
    fn name(&self) -> &str {
        "script"
    }
    fn generate(&self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        self.seen.lock().unwrap().push(req.clone());
        let out = &self.script[(req.attempt - 1).min(self.script.len() - 1)];
        Ok((0..req.n).map(|c| format!("{out} #{c}")).collect())
    }
}

/// First index attaining the maximum of `scores`.
pub fn first_argmax(scores: &[f64]) -> usize {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().position(|&s| s == max).expect("non-empty")
}

/// Protocol rules every refinement trace must obey, checked against the
/// requests the backend actually received. Returns the violations found.
pub fn protocol_violations(
    trace: &dialect_refine::engine::RefineTrace,
    requests: &[GenerationRequest],
    cfg: &dialect_refine::engine::MethodConfig,
) -> Vec<String> {
    use dialect_refine::engine::RefineMode;
    let mut bad = Vec::new();
    let a = &trace.attempts;
    let budget = if cfg.refine_mode == RefineMode::None { 1 } else { 3 };
    if trace.attempts_used != a.len() || a.is_empty() || a.len() > budget {
        bad.push(format!("attempts_used {} with {} attempts", trace.attempts_used, a.len()));
    }
    if requests.len() != a.len() {
        bad.push(format!("{} requests for {} attempts", requests.len(), a.len()));
    }
    if a.iter().rev().skip(1).any(|x| x.verified) {
        bad.push("attempt after a verified attempt".into());
    }
    if !a.last().is_some_and(|x| x.verified) && a.len() != budget {
        bad.push("stopped early without verification".into());
    }
    let labels = ["Gyeongsang", "Jeju", "Jeolla", "Standard", "Unknown"];
    for (i, x) in a.iter().enumerate() {
        let expected_n = match cfg.refine_mode {
            RefineMode::Multi => cfg.k_schedule[i],
            _ => 1,
        };
        if x.candidates.len() != expected_n {
            bad.push(format!("attempt {} has {} candidates, expected {expected_n}", i + 1, x.candidates.len()));
        }
        match (&x.wrong_label, x.verified) {
            (None, true) if x.prediction.label == trace.target => {}
            (Some(w), false) if *w == x.prediction.label && *w != trace.target => {}
            other => bad.push(format!("attempt {} inconsistent verdict {other:?}", i + 1)),
        }
        let Some(req) = requests.get(i) else { continue };
        let line = req.user.lines().find(|l| l.contains("was classified as"));
        match (i, line) {
            (0, None) => {}
            (0, Some(_)) => bad.push("first prompt carries feedback".into()),
            (_, None) => bad.push(format!("prompt {} lacks feedback", i + 1)),
            (_, Some(l)) => {
                let wrong = a[i - 1].wrong_label.as_ref().map(|w| w.as_str()).unwrap_or("?");
                let head = l.split(" instead of").next().unwrap_or("");
                let named: Vec<&str> = labels.iter().copied().filter(|n| head.contains(n)).collect();
                if named != [wrong] {
                    bad.push(format!("prompt {} names {named:?}, expected {wrong}", i + 1));
                }
            }
        }
        let oscillating =
            i >= 2 && matches!((&a[i - 2].wrong_label, &a[i - 1].wrong_label), (Some(p), Some(q)) if p != q);
        if req.user.contains("oscillates between") != oscillating {
            bad.push(format!("prompt {} oscillation sentence mismatch", i + 1));
        }
    }
    let distinct_pair =
        a.windows(2).any(|w| matches!((&w[0].wrong_label, &w[1].wrong_label), (Some(p), Some(q)) if p != q));
    if trace.oscillation_flagged != distinct_pair {
        bad.push(format!(
            "oscillation_flagged {} but distinct consecutive wrong labels {distinct_pair}",
            trace.oscillation_flagged
        ));
    }
    bad
}
