//! Experiment tables: metric × method × model, and the hard-subset view.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::engine::{hard_subset, prompt, summarize, EngineError, MethodConfig, RefineTrace};
use crate::llm::BackendSpec;
use crate::metrics::MetricReport;

pub const METRICS: [&str; 5] = ["chrF++", "BLEU", "DFS", "TDR", "Attempts"];

fn metric(r: &MetricReport, name: &str) -> f64 {
    match name {
        "chrF++" => r.chrf_pp,
        "BLEU" => r.bleu,
        "DFS" => r.dfs_mean,
        "TDR" => r.tdr,
        "Attempts" => r.mean_attempts,
        _ => unreachable!("unknown metric {name}"),
    }
}

fn fmt_metric(_name: &str, v: f64) -> String {
    format!("{v:.2}")
}

/// Orders methods by the default grid, unknown names last.
fn method_order(methods: impl IntoIterator<Item = String>) -> Vec<String> {
    let grid: Vec<String> = MethodConfig::default_grid().iter().map(MethodConfig::name).collect();
    let mut v: Vec<String> = methods.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    v.sort_by_key(|m| (grid.iter().position(|g| g == m).unwrap_or(usize::MAX), m.clone()));
    v
}

/// Reproducible settings printed under every table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub template_hash: String,
    pub example_order: String,
    pub icl_k: usize,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    pub backend: String,
    pub methods: Vec<String>,
    pub temperature: f64,
    pub k_schedule: Vec<usize>,
    pub max_attempts: usize,
}

impl RunMetadata {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        let method = cfg.methods.first().cloned().unwrap_or_default();
        let backend = match &cfg.backend {
            BackendSpec::Scripted(p) => format!(
                "scripted:{} p_base={} feedback_boost={} icl_boost={} confusion_p={}",
                p.name, p.p_base, p.feedback_boost, p.icl_boost, p.confusion_p
            ),
            BackendSpec::Http(h) => format!("http:{} model={}", h.endpoint, h.model),
        };
        Self {
            seed: cfg.seed,
            template_hash: format!("{:016x}", prompt::template_hash()),
            example_order: "rank".into(),
            icl_k: cfg.retrieval.icl_k,
            bm25_k1: cfg.retrieval.bm25.k1,
            bm25_b: cfg.retrieval.bm25.b,
            backend,
            methods: cfg.methods.iter().map(MethodConfig::name).collect(),
            temperature: method.temperature,
            k_schedule: method.k_schedule,
            max_attempts: method.max_attempts,
        }
    }

    pub fn footer(&self) -> String {
        let mut out = String::from("\nRun metadata:\n");
        let json = serde_json::to_value(self).expect("metadata serializes");
        for (k, v) in json.as_object().expect("object") {
            let _ = writeln!(out, "- {k}: {v}");
        }
        out
    }
}

/// Metric × method rows with one column per model plus the model average.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodTable {
    pub models: Vec<String>,
    pub methods: Vec<String>,
    /// `cells[(metric, method)][model]`
    pub cells: BTreeMap<(String, String), BTreeMap<String, f64>>,
}

impl MethodTable {
    pub fn from_reports(reports: &[MetricReport]) -> Self {
        let models: Vec<String> =
            reports.iter().map(|r| r.model.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let methods = method_order(reports.iter().map(|r| r.method.clone()));
        let mut cells: BTreeMap<(String, String), BTreeMap<String, f64>> = BTreeMap::new();
        for r in reports {
            for m in METRICS {
                cells.entry((m.to_owned(), r.method.clone())).or_default().insert(r.model.clone(), metric(r, m));
            }
        }
        Self { models, methods, cells }
    }

    pub fn model_avg(&self, metric: &str, method: &str) -> Option<f64> {
        let row = self.cells.get(&(metric.to_owned(), method.to_owned()))?;
        Some(row.values().sum::<f64>() / row.len() as f64)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("| Metric | Method | {} | Model Avg |\n", self.models.join(" | "));
        let _ = writeln!(out, "|---|---|{}---:|", "---:|".repeat(self.models.len()));
        for metric in METRICS {
            for method in &self.methods {
                let Some(row) = self.cells.get(&(metric.to_owned(), method.clone())) else { continue };
                let vals: Vec<String> =
                    self.models.iter().map(|m| row.get(m).map_or("-".into(), |v| fmt_metric(metric, *v))).collect();
                let avg = self.model_avg(metric, method).expect("row exists");
                let _ = writeln!(out, "| {metric} | {method} | {} | {} |", vals.join(" | "), fmt_metric(metric, avg));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["metric".to_owned(), "method".to_owned()];
        header.extend(self.models.iter().cloned());
        header.push("model_avg".into());
        w.write_record(&header).expect("csv header");
        for metric in METRICS {
            for method in &self.methods {
                let Some(row) = self.cells.get(&(metric.to_owned(), method.clone())) else { continue };
                let mut rec = vec![metric.to_owned(), method.clone()];
                rec.extend(self.models.iter().map(|m| row.get(m).map_or(String::new(), |v| format!("{v:.6}"))));
                rec.push(format!("{:.6}", self.model_avg(metric, method).expect("row exists")));
                w.write_record(&rec).expect("csv row");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory")).expect("utf-8")
    }
}

/// Per-method averages over models on the hard subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardSubsetRow {
    pub method: String,
    pub items: usize,
    pub chrf_pp: f64,
    pub bleu: f64,
    pub dfs: f64,
    pub tdr: f64,
    pub attempts: f64,
}

/// Traces grouped as `model → method → traces`.
pub type TraceSets = BTreeMap<String, BTreeMap<String, Vec<RefineTrace>>>;

pub fn group_traces(traces: impl IntoIterator<Item = RefineTrace>) -> TraceSets {
    let mut out = TraceSets::new();
    for t in traces {
        out.entry(t.model.clone()).or_default().entry(t.method.clone()).or_default().push(t);
    }
    out
}

/// Summaries of every (model, method) trace set.
pub fn summaries(sets: &TraceSets) -> Result<Vec<MetricReport>, EngineError> {
    let mut out = Vec::new();
    for methods in sets.values() {
        for traces in methods.values() {
            out.push(summarize(traces)?);
        }
    }
    Ok(out)
}

/// Hard-subset item ids per model.
pub fn hard_subsets(sets: &TraceSets) -> Result<BTreeMap<String, Vec<String>>, EngineError> {
    sets.iter()
        .map(|(model, methods)| {
            let runs: Vec<Vec<RefineTrace>> = methods.values().cloned().collect();
            Ok((model.clone(), hard_subset(&runs)?))
        })
        .collect()
}

/// Restricts each model's traces to its hard subset and averages the
/// per-model summaries for each method.
pub fn hard_subset_table(sets: &TraceSets) -> Result<Vec<HardSubsetRow>, EngineError> {
    let subsets = hard_subsets(sets)?;
    let mut per_method: BTreeMap<String, Vec<MetricReport>> = BTreeMap::new();
    for (model, methods) in sets {
        let ids: BTreeSet<&str> = subsets[model].iter().map(String::as_str).collect();
        if ids.is_empty() {
            continue;
        }
        for (method, traces) in methods {
            let kept: Vec<RefineTrace> = traces.iter().filter(|t| ids.contains(t.item_id.as_str())).cloned().collect();
            per_method.entry(method.clone()).or_default().push(summarize(&kept)?);
        }
    }
    let order = method_order(per_method.keys().cloned());
    Ok(order
        .into_iter()
        .map(|method| {
            let rs = &per_method[&method];
            let avg = |f: fn(&MetricReport) -> f64| rs.iter().map(f).sum::<f64>() / rs.len() as f64;
            HardSubsetRow {
                items: rs.iter().map(|r| r.items).sum(),
                chrf_pp: avg(|r| r.chrf_pp),
                bleu: avg(|r| r.bleu),
                dfs: avg(|r| r.dfs_mean),
                tdr: avg(|r| r.tdr),
                attempts: avg(|r| r.mean_attempts),
                method,
            }
        })
        .collect())
}

pub fn hard_subset_markdown(rows: &[HardSubsetRow]) -> String {
    let mut out = String::from(
        "| Method | Items | chrF++ | BLEU | DFS | TDR | Attempts |\n|---|---:|---:|---:|---:|---:|---:|\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} |",
            r.method, r.items, r.chrf_pp, r.bleu, r.dfs, r.tdr, r.attempts
        );
    }
    out
}

pub fn hard_subset_csv(rows: &[HardSubsetRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("row serializes");
    }
    if rows.is_empty() {
        w.write_record(["method", "items", "chrf_pp", "bleu", "dfs", "tdr", "attempts"]).expect("header");
    }
    String::from_utf8(w.into_inner().expect("in-memory")).expect("utf-8")
}
