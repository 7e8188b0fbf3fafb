use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prompt::{build_prompt, FeedbackState, PromptError, PromptMode};
use crate::classifier::{ClassifierError, Classify, EmbeddingMode, Prediction};
use crate::corpus::CorpusRecord;
use crate::label::DialectLabel;
use crate::llm::{generate_with_retry, Backend, BackendError, GenerationRequest, RetryPolicy};
use crate::metrics::{bleu, chrf_pp, dfs_slices, BleuConfig, MetricReport, MetricsError, DFS_EPSILON};
use crate::retrieval::{Bm25Index, Bm25Params, RetrievalError};
use crate::seed;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("backend failure: {0}")]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("invalid method config: {0}")]
    Config(String),
    #[error("target {0} is not a classifier label")]
    UnknownTarget(DialectLabel),
    #[error("no example index for dialect {0}")]
    NoIndex(DialectLabel),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("trace sets cover different test items")]
    MismatchedTestSets,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RefineMode {
    None,
    Single,
    Multi,
}

/// One cell of the method grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodConfig {
    pub prompt_mode: PromptMode,
    pub refine_mode: RefineMode,
    pub max_attempts: usize,
    pub k_schedule: Vec<usize>,
    pub icl_k: usize,
    /// Fixed target; `None` uses each item's own label.
    pub target: Option<DialectLabel>,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            prompt_mode: PromptMode::ZeroShot,
            refine_mode: RefineMode::None,
            max_attempts: 3,
            k_schedule: vec![3, 4, 5],
            icl_k: 10,
            target: None,
            temperature: 0.7,
            seed: 1337,
        }
    }
}

impl MethodConfig {
    pub fn new(prompt_mode: PromptMode, refine_mode: RefineMode) -> Self {
        Self { prompt_mode, refine_mode, ..Self::default() }
    }

    /// `ZS`, `ZS+S`, `ZS+M`, `ICL`, `ICL+S` or `ICL+M`.
    pub fn name(&self) -> String {
        let base = match self.prompt_mode {
            PromptMode::ZeroShot => "ZS",
            PromptMode::InContext => "ICL",
        };
        match self.refine_mode {
            RefineMode::None => base.to_owned(),
            RefineMode::Single => format!("{base}+S"),
            RefineMode::Multi => format!("{base}+M"),
        }
    }

    pub fn from_name(name: &str) -> Result<Self, EngineError> {
        let (base, refine) = match name.split_once('+') {
            Some((b, "S")) => (b, RefineMode::Single),
            Some((b, "M")) => (b, RefineMode::Multi),
            None => (name, RefineMode::None),
            _ => return Err(EngineError::Config(format!("unknown method {name:?}"))),
        };
        let mode = match base {
            "ZS" => PromptMode::ZeroShot,
            "ICL" => PromptMode::InContext,
            _ => return Err(EngineError::Config(format!("unknown method {name:?}"))),
        };
        Ok(Self::new(mode, refine))
    }

    /// The six-method grid in reporting order.
    pub fn default_grid() -> Vec<Self> {
        ["ZS", "ZS+S", "ZS+M", "ICL", "ICL+S", "ICL+M"]
            .iter()
            .map(|n| Self::from_name(n).expect("grid names parse"))
            .collect()
    }

    /// Attempts this method may spend; methods without refinement get one.
    pub fn attempt_budget(&self) -> usize {
        if self.refine_mode == RefineMode::None {
            1
        } else {
            self.max_attempts
        }
    }

    pub fn candidates_for(&self, attempt: usize) -> usize {
        match self.refine_mode {
            RefineMode::Multi => self.k_schedule[attempt - 1],
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(format!("{}: {m}", self.name())));
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1");
        }
        if self.refine_mode == RefineMode::Multi {
            if self.k_schedule.len() < self.max_attempts {
                return bad("k_schedule is shorter than max_attempts");
            }
            if self.k_schedule[0] == 0 || self.k_schedule.windows(2).any(|w| w[0] >= w[1]) {
                return bad("k_schedule must be positive and strictly increasing");
            }
        }
        if self.prompt_mode == PromptMode::InContext && self.icl_k == 0 {
            return bad("icl_k must be at least 1");
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    /// 1-based.
    pub index: usize,
    pub system: String,
    pub prompt: String,
    pub candidates: Vec<String>,
    pub selected_index: usize,
    pub selected: String,
    pub prediction: Prediction,
    pub verified: bool,
    pub wrong_label: Option<DialectLabel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineTrace {
    pub item_id: String,
    pub method: String,
    pub refine_mode: RefineMode,
    pub model: String,
    pub target: DialectLabel,
    pub source: String,
    pub reference: String,
    pub attempts: Vec<Attempt>,
    pub final_output: String,
    pub final_label: DialectLabel,
    pub success: bool,
    pub attempts_used: usize,
    pub oscillation_flagged: bool,
    /// Logit-space DFS of the final output, filled in by [`run_method`].
    pub dfs: Option<f64>,
}

impl RefineTrace {
    pub fn first_attempt_failed(&self) -> bool {
        self.attempts.first().is_some_and(|a| !a.verified)
    }
}

/// First candidate maximising the target posterior.
pub fn select_best(candidates: &[String], classifier: &dyn Classify, target: &DialectLabel) -> (usize, Prediction) {
    assert!(!candidates.is_empty(), "select_best needs at least one candidate");
    let t = classifier.label_index(target);
    let mut best: Option<(usize, Prediction)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let pred = classifier.predict_proba(c);
        let score = t.map_or(0.0, |t| pred.posterior[t]);
        if best.as_ref().is_none_or(|(_, b)| score > t.map_or(0.0, |t| b.posterior[t])) {
            best = Some((i, pred));
        }
    }
    best.expect("non-empty")
}

/// Seed of the request for `item_id` on `attempt`; shared across methods so
/// that method comparisons are paired.
pub fn request_seed(global: u64, item_id: &str, attempt: usize) -> u64 {
    seed::derive(global, &[&item_id, &attempt])
}

/// One BM25 index per target dialect over the example pool.
#[derive(Clone, Debug, Default)]
pub struct ExampleRetriever {
    pub indexes: BTreeMap<DialectLabel, Bm25Index>,
}

impl ExampleRetriever {
    pub fn build(pool: &[CorpusRecord], params: &Bm25Params) -> Result<Self, EngineError> {
        let mut by_class: BTreeMap<DialectLabel, Vec<CorpusRecord>> = BTreeMap::new();
        for r in pool.iter().filter(|r| r.label.is_dialect()) {
            by_class.entry(r.label.clone()).or_default().push(r.clone());
        }
        let indexes = by_class
            .into_iter()
            .map(|(label, docs)| Ok((label, Bm25Index::build(&docs, params.clone())?)))
            .collect::<Result<_, RetrievalError>>()?;
        Ok(Self { indexes })
    }

    /// Top-`k` (standard, dialect) pairs in rank order.
    pub fn examples(
        &self,
        target: &DialectLabel,
        source: &str,
        k: usize,
    ) -> Result<Vec<(String, String)>, EngineError> {
        let index = self.indexes.get(target).ok_or_else(|| EngineError::NoIndex(target.clone()))?;
        Ok(index.top_k(source, k).into_iter().map(|d| (d.record.standard.clone(), d.record.dialect.clone())).collect())
    }
}

/// Drives one method for one backend/classifier pair.
pub struct Refiner<'a> {
    pub backend: &'a dyn Backend,
    pub classifier: &'a dyn Classify,
    pub retriever: Option<&'a ExampleRetriever>,
    pub retry: RetryPolicy,
}

impl Refiner<'_> {
    pub fn refine(&self, item: &CorpusRecord, cfg: &MethodConfig) -> Result<RefineTrace, EngineError> {
        cfg.validate()?;
        let target = cfg.target.clone().unwrap_or_else(|| item.label.clone());
        if self.classifier.label_index(&target).is_none() {
            return Err(EngineError::UnknownTarget(target));
        }
        let examples = match cfg.prompt_mode {
            PromptMode::ZeroShot => Vec::new(),
            PromptMode::InContext => {
                let retriever = self.retriever.ok_or_else(|| EngineError::NoIndex(target.clone()))?;
                retriever.examples(&target, &item.standard, cfg.icl_k)?
            }
        };

        let mut attempts: Vec<Attempt> = Vec::new();
        let mut feedback: Option<FeedbackState> = None;
        let mut oscillation_flagged = false;
        for index in 1..=cfg.attempt_budget() {
            let (system, user) = build_prompt(cfg.prompt_mode, &item.standard, &target, &examples, feedback.as_ref())?;
            let req = GenerationRequest {
                system,
                user,
                n: cfg.candidates_for(index),
                temperature: cfg.temperature,
                seed: request_seed(cfg.seed, &item.id, index),
                attempt: index,
            };
            let candidates = generate_with_retry(self.backend, &req, &self.retry)?;
            let (selected_index, prediction) = select_best(&candidates, self.classifier, &target);
            let verified = prediction.label == target;
            let wrong_label = (!verified).then(|| prediction.label.clone());
            let selected = candidates[selected_index].clone();
            if let Some(wrong) = &wrong_label {
                let previous = attempts.last().and_then(|a| a.wrong_label.clone());
                let oscillation_from = previous.filter(|p| p != wrong);
                oscillation_flagged |= oscillation_from.is_some();
                feedback =
                    Some(FeedbackState { wrong_label: wrong.clone(), prev_output: selected.clone(), oscillation_from });
            }
            attempts.push(Attempt {
                index,
                system: req.system,
                prompt: req.user,
                candidates,
                selected_index,
                selected,
                prediction,
                verified,
                wrong_label,
            });
            if verified {
                break;
            }
        }
        let last = attempts.last().expect("at least one attempt");
        Ok(RefineTrace {
            item_id: item.id.clone(),
            method: cfg.name(),
            refine_mode: cfg.refine_mode,
            model: self.backend.name().to_owned(),
            target,
            source: item.standard.clone(),
            reference: item.dialect.clone(),
            final_output: last.selected.clone(),
            final_label: last.prediction.label.clone(),
            success: last.verified,
            attempts_used: attempts.len(),
            oscillation_flagged,
            attempts,
            dfs: None,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    pub retry: RetryPolicy,
    /// Worker threads; 0 uses the global pool.
    pub max_inflight: usize,
}

/// Refines every test item and aggregates the run.
pub fn run_method(
    test: &[CorpusRecord],
    backend: &dyn Backend,
    classifier: &dyn Classify,
    retriever: Option<&ExampleRetriever>,
    cfg: &MethodConfig,
    options: &RunOptions,
) -> Result<(Vec<RefineTrace>, MetricReport), EngineError> {
    cfg.validate()?;
    let refiner = Refiner { backend, classifier, retriever, retry: options.retry.clone() };
    let work = || -> Result<Vec<RefineTrace>, EngineError> {
        test.par_iter()
            .map(|item| {
                let mut trace = refiner.refine(item, cfg)?;
                let e = |t: &str| classifier.embed(t, EmbeddingMode::Logit);
                trace.dfs =
                    Some(dfs_slices(&e(&trace.final_output), &e(&trace.reference), &e(&trace.source), DFS_EPSILON)?);
                Ok(trace)
            })
            .collect()
    };
    let traces = if options.max_inflight > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.max_inflight)
            .build()
            .map_err(|e| EngineError::Config(e.to_string()))?
            .install(work)?
    } else {
        work()?
    };
    let report = summarize(&traces)?;
    Ok((traces, report))
}

/// Aggregate scores of a set of traces from one method and model.
///
/// The dialect column is the common target, or `All` when targets differ.
pub fn summarize(traces: &[RefineTrace]) -> Result<MetricReport, EngineError> {
    let first = traces.first().ok_or(MetricsError::EmptyHypothesisSet)?;
    let n = traces.len() as f64;
    let hyps: Vec<&str> = traces.iter().map(|t| t.final_output.as_str()).collect();
    let refs: Vec<&str> = traces.iter().map(|t| t.reference.as_str()).collect();
    let targets: BTreeSet<&DialectLabel> = traces.iter().map(|t| &t.target).collect();
    let dfs: Vec<f64> = traces.iter().filter_map(|t| t.dfs).collect();
    Ok(MetricReport {
        model: first.model.clone(),
        method: first.method.clone(),
        dialect: if targets.len() == 1 { first.target.to_string() } else { "All".into() },
        items: traces.len(),
        chrf_pp: chrf_pp(&hyps, &refs)?,
        bleu: bleu(&hyps, &refs, &BleuConfig::default())?,
        dfs_mean: if dfs.is_empty() { f64::NAN } else { dfs.iter().sum::<f64>() / dfs.len() as f64 },
        tdr: traces.iter().filter(|t| t.final_label == t.target).count() as f64 / n,
        mean_attempts: traces.iter().map(|t| t.attempts_used as f64).sum::<f64>() / n,
    })
}

/// Item ids whose first attempt failed under every refinement-enabled method.
///
/// Ids come back in the order of the first trace set.
pub fn hard_subset(runs: &[Vec<RefineTrace>]) -> Result<Vec<String>, EngineError> {
    if runs.len() < 2 {
        return Err(EngineError::Config("hard subset needs traces from at least two methods".into()));
    }
    fn ids(run: &[RefineTrace]) -> BTreeSet<&str> {
        run.iter().map(|t| t.item_id.as_str()).collect()
    }
    let reference = ids(&runs[0]);
    if runs.iter().any(|r| ids(r) != reference || r.len() != reference.len()) {
        return Err(EngineError::MismatchedTestSets);
    }
    let refined: Vec<BTreeMap<&str, &RefineTrace>> = runs
        .iter()
        .filter(|r| r.first().is_some_and(|t| t.refine_mode != RefineMode::None))
        .map(|r| r.iter().map(|t| (t.item_id.as_str(), t)).collect())
        .collect();
    if refined.is_empty() {
        return Err(EngineError::Config("no refinement-enabled method among the traces".into()));
    }
    Ok(runs[0]
        .iter()
        .map(|t| t.item_id.as_str())
        .filter(|id| refined.iter().all(|run| run[id].first_attempt_failed()))
        .map(str::to_owned)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{softmax, EmbeddingMode};
    use crate::llm::{ScriptedBackend, ScriptedPersona};
    use std::sync::Mutex;

    /// Labels a text by the first label name it contains, else by `fallback`.
    struct KeywordClassifier {
        labels: Vec<DialectLabel>,
        fallback: usize,
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

    fn labels() -> Vec<DialectLabel> {
        ["Jeju", "Jeolla", "Standard", "Unknown"].iter().map(|s| DialectLabel::new(*s)).collect()
    }

    /// Replays a script of outputs, one entry per attempt.
    struct ScriptBackend {
        script: Vec<&'static str>,
        seen: Mutex<Vec<GenerationRequest>>,
    }

    impl Backend for ScriptBackend {
        fn name(&self) -> &str {
            "script"
        }
        fn generate(&self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
            self.seen.lock().unwrap().push(req.clone());
            let out = self.script[(req.attempt - 1).min(self.script.len() - 1)];
            Ok(vec![out.to_owned(); req.n])
        }
    }

    fn item() -> CorpusRecord {
        CorpusRecord::new("item-1", "plain text", "Jeju text", DialectLabel::new("Jeju"))
    }

    fn run(script: Vec<&'static str>, cfg: &MethodConfig) -> (RefineTrace, Vec<GenerationRequest>) {
        let backend = ScriptBackend { script, seen: Mutex::new(Vec::new()) };
        let clf = KeywordClassifier { labels: labels(), fallback: 2 };
        let r = Refiner { backend: &backend, classifier: &clf, retriever: None, retry: RetryPolicy::none() };
        let trace = r.refine(&item(), cfg).unwrap();
        (trace, backend.seen.into_inner().unwrap())
    }

    #[test]
    fn method_names_round_trip() {
        for cfg in MethodConfig::default_grid() {
            assert_eq!(MethodConfig::from_name(&cfg.name()).unwrap(), cfg);
        }
        assert!(MethodConfig::from_name("ZS+X").is_err());
    }

    #[test]
    fn immediate_success_stops() {
        let (t, _) = run(vec!["Jeju out"], &MethodConfig::from_name("ZS+S").unwrap());
        assert!(t.success && t.attempts_used == 1 && !t.oscillation_flagged);
    }

    #[test]
    fn always_rejected_uses_every_attempt() {
        let cfg = MethodConfig::from_name("ZS+M").unwrap();
        let (t, seen) = run(vec!["nothing"], &cfg);
        assert_eq!(t.attempts_used, 3);
        assert!(!t.success);
        assert_eq!(t.attempts.iter().map(|a| a.candidates.len()).collect::<Vec<_>>(), [3, 4, 5]);
        assert_eq!(t.final_output, "nothing");
        assert!(seen[1].user.starts_with("[Feedback]\n- The previous output was classified as Standard instead"));
        assert!(!t.oscillation_flagged);
    }

    #[test]
    fn no_refinement_means_one_attempt() {
        let (t, _) = run(vec!["nothing"], &MethodConfig::from_name("ZS").unwrap());
        assert_eq!((t.attempts_used, t.success), (1, false));
    }

    #[test]
    fn oscillation_is_flagged_and_announced() {
        let cfg = MethodConfig::from_name("ZS+S").unwrap();
        let (t, seen) = run(vec!["Jeolla a", "Unknown b", "Jeju c"], &cfg);
        assert!(t.success && t.oscillation_flagged && t.attempts_used == 3);
        assert!(seen[2].user.contains("The output oscillates between Jeolla and Unknown.\n"));
        assert!(seen[2].user.contains("- Previous output : Unknown b\n"));
        assert!(!seen[1].user.contains("oscillates"));

        let (t, seen) = run(vec!["Jeolla a", "Jeolla b", "x"], &cfg);
        assert!(t.oscillation_flagged, "Jeolla then Standard differ");
        assert!(!seen[2].user.contains("oscillates"));
    }

    #[test]
    fn select_best_takes_first_maximum() {
        let clf = KeywordClassifier { labels: labels(), fallback: 2 };
        let c: Vec<String> = ["x", "Jeju a", "Jeju b"].iter().map(|s| s.to_string()).collect();
        assert_eq!(select_best(&c, &clf, &DialectLabel::new("Jeju")).0, 1);
        assert_eq!(select_best(&c[..1], &clf, &DialectLabel::new("Jeju")).0, 0);
    }

    #[test]
    fn hard_subset_rules() {
        let cfg = MethodConfig::from_name("ZS+S").unwrap();
        let ok = run(vec!["Jeju"], &cfg).0;
        let bad = run(vec!["x"], &cfg).0;
        let other = RefineTrace { item_id: "item-2".into(), ..bad.clone() };
        let a = vec![bad.clone(), other.clone()];
        let b = vec![ok.clone(), RefineTrace { item_id: "item-2".into(), ..bad.clone() }];
        assert_eq!(hard_subset(&[a.clone(), b]).unwrap(), ["item-2"]);
        assert!(matches!(hard_subset(&[a.clone(), vec![ok]]), Err(EngineError::MismatchedTestSets)));
    }

    #[test]
    fn empty_test_set_reports_empty_hypotheses() {
        let backend = ScriptedBackend::new(ScriptedPersona::perfect()).unwrap();
        let clf = KeywordClassifier { labels: labels(), fallback: 2 };
        let err = run_method(&[], &backend, &clf, None, &MethodConfig::default(), &RunOptions::default()).unwrap_err();
        assert!(matches!(err, EngineError::Metrics(MetricsError::EmptyHypothesisSet)));
    }
}
