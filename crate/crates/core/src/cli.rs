//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 backend failure.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    ensemble_search, evaluate_classifier, load_model, save_model, train, BaseClassifier, ClassifierError, Classify,
    EmbeddingMode, Ensemble, Model,
};
use crate::config::{ConfigError, ExperimentConfig};
use crate::corpus::{self, CorpusError, CorpusRecord, SplitDataset};
use crate::engine::{run_method, EngineError, ExampleRetriever, MethodConfig, RefineTrace};
use crate::jsonl::{self, JsonlError};
use crate::label::DialectLabel;
use crate::metrics::{bleu, chrf_pp, dfs_slices, BleuConfig, MetricReport, MetricRow, MetricsError, DFS_EPSILON};
use crate::report::{self, MethodTable, RunMetadata};
use crate::retrieval::{Bm25Index, RetrievalError};
use crate::synthlang::{default_specs, generate_labeled_corpus_with, SpecFile, SynthError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Backend(_) => 4,
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}
data_error!(CorpusError, ClassifierError, JsonlError, RetrievalError, SynthError, MetricsError);

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Backend(_) => CliError::Backend(e.to_string()),
            EngineError::Config(_) | EngineError::Prompt(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dialect-refine", version, about = "Classifier-guided dialect translation refinement")]
pub struct Cli {
    /// Experiment config (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic labeled corpus.
    Synth,
    /// Split the corpus into train / eval / example pool / test.
    Curate,
    /// Train every configured base classifier.
    Train,
    /// Score every member subset on the eval split and save the best ensemble.
    EnsembleSearch,
    /// Build the per-dialect BM25 example indexes.
    Index,
    /// Run the method grid on the test split and write traces.
    Refine {
        /// Method name (ZS, ZS+S, ZS+M, ICL, ICL+S, ICL+M); repeatable.
        #[arg(long)]
        method: Vec<String>,
        /// Restrict test items to one target dialect.
        #[arg(long)]
        dialect: Option<String>,
        /// Number of retrieved in-context examples.
        #[arg(long)]
        icl_k: Option<usize>,
        /// Test records to use instead of the curated test split.
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Score hypothesis rows (JSONL with variant, hypothesis, reference, source).
    Evaluate {
        #[arg(long)]
        input: PathBuf,
        /// Embedding space for DFS: logit or raw.
        #[arg(long, default_value = "logit")]
        embedding: EmbeddingMode,
        /// Restrict rows to those whose variant mentions this dialect.
        #[arg(long)]
        dialect: Option<String>,
    },
    /// Aggregate traces into metric tables.
    Report,
    /// Collect items whose first attempt failed under every refinement method.
    HardSubset,
    /// Print the effective configuration as TOML.
    PrintConfig,
}

/// Parses arguments and runs the command.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => return Err(CliError::Config(e.to_string())),
    };
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.apply_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    match cli.command {
        Command::Synth => cmd_synth(&cfg),
        Command::Curate => cmd_curate(&cfg),
        Command::Train => cmd_train(&cfg),
        Command::EnsembleSearch => cmd_ensemble_search(&cfg),
        Command::Index => cmd_index(&cfg),
        Command::Refine { method, dialect, icl_k, test } => {
            if let Some(k) = icl_k {
                cfg.apply_icl_k(k);
            }
            cfg.validate()?;
            cmd_refine(&cfg, &method, dialect.as_deref(), test.as_deref())
        }
        Command::Evaluate { input, embedding, dialect } => cmd_evaluate(&cfg, &input, embedding, dialect.as_deref()),
        Command::Report => cmd_report(&cfg),
        Command::HardSubset => cmd_hard_subset(&cfg),
        Command::PrintConfig => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn specs(cfg: &ExperimentConfig) -> Result<Vec<crate::synthlang::SyntheticDialectSpec>, CliError> {
    Ok(match &cfg.data.spec_file {
        Some(p) => SpecFile::load(p)?,
        None => default_specs(),
    })
}

pub fn cmd_synth(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let layout = cfg.layout();
    let specs = specs(cfg)?;
    let records = generate_labeled_corpus_with(&specs, cfg.data.synth_per_class, &cfg.data.language, cfg.seed)?;
    corpus::write_records(&layout.corpus(), &records)?;
    write_file(&layout.specs(), &SpecFile::to_toml(&specs))?;
    println!("wrote {} records to {}", records.len(), layout.corpus().display());
    Ok(())
}

pub fn cmd_curate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let layout = cfg.layout();
    let source = cfg.data.corpus.clone().unwrap_or_else(|| layout.corpus());
    let records = corpus::read_records(&source)?;
    let mut split = corpus::curate(&records, &cfg.data.curation)?;
    if cfg.data.unknown_synth > 0 {
        let extra = corpus::synthesize_unknown(&split.train, cfg.data.unknown_synth, cfg.seed)?;
        split.train.extend(extra);
    }
    split.write_dir(&layout.split_dir())?;
    println!(
        "train {} / eval {} / example pool {} / test {} -> {}",
        split.train.len(),
        split.eval.len(),
        split.icl_pool.len(),
        split.test.len(),
        layout.split_dir().display()
    );
    Ok(())
}

pub fn cmd_train(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let layout = cfg.layout();
    let split = SplitDataset::read_dir(&layout.split_dir())?;
    let members: Vec<BaseClassifier> = cfg
        .classifier
        .members
        .par_iter()
        .map(|m| train(&split.train, &m.featurizer, &m.train))
        .collect::<Result<_, _>>()?;
    let mut summary = String::from("| Member | Featurizer | Accuracy | Macro F1 |\n|---|---|---:|---:|\n");
    for (i, m) in members.into_iter().enumerate() {
        let r = evaluate_classifier(&m, &split.eval)?;
        let f = &m.featurizer;
        summary.push_str(&format!(
            "| {i} | char {}-{} dim {} words {} | {:.4} | {:.4} |\n",
            f.ngram_min, f.ngram_max, f.hash_dim, f.use_word_unigrams, r.accuracy, r.macro_f1
        ));
        save_model(&layout.member(i), &Model::Base(m))?;
    }
    write_file(&layout.report_dir().join("members.md"), &summary)?;
    print!("{summary}");
    Ok(())
}

#[derive(Serialize)]
struct SearchRow {
    rank: usize,
    members: String,
    size: usize,
    accuracy: f64,
    macro_f1: f64,
}

pub fn cmd_ensemble_search(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let layout = cfg.layout();
    let split = SplitDataset::read_dir(&layout.split_dir())?;
    let mut members = Vec::new();
    for i in 0..cfg.classifier.members.len() {
        match load_model(&layout.member(i))? {
            Model::Base(b) => members.push(b),
            Model::Ensemble(_) => return Err(CliError::Data(format!("member {i} is an ensemble"))),
        }
    }
    let scores = ensemble_search(&members, &split.eval)?;
    let rows: Vec<SearchRow> = scores
        .iter()
        .enumerate()
        .map(|(i, s)| SearchRow {
            rank: i + 1,
            members: s.members.iter().map(usize::to_string).collect::<Vec<_>>().join("+"),
            size: s.members.len(),
            accuracy: s.accuracy,
            macro_f1: s.macro_f1,
        })
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| CliError::Data(e.to_string()))?;
    }
    let csv_text = String::from_utf8(w.into_inner().expect("in-memory")).expect("utf-8");
    let mut md = String::from("| Rank | Members | Ensemble size | Accuracy | Macro F1 |\n|---:|---|---:|---:|---:|\n");
    for r in &rows {
        md.push_str(&format!("| {} | {} | {} | {:.4} | {:.4} |\n", r.rank, r.members, r.size, r.accuracy, r.macro_f1));
    }
    write_file(&layout.report_dir().join("ensemble_search.csv"), &csv_text)?;
    write_file(&layout.report_dir().join("ensemble_search.md"), &md)?;

    let best = &scores[0];
    let ensemble = Ensemble::new(best.members.iter().map(|&i| members[i].clone()).collect())?;
    let report = evaluate_classifier(&ensemble, &split.eval)?;
    write_file(&layout.report_dir().join("classifier.md"), &report.to_markdown())?;
    save_model(&layout.ensemble(), &Model::Ensemble(ensemble))?;
    print!("{md}");
    println!("best ensemble {} saved to {}", rows[0].members, layout.ensemble().display());
    Ok(())
}

pub fn cmd_index(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let layout = cfg.layout();
    let split = SplitDataset::read_dir(&layout.split_dir())?;
    let retriever = ExampleRetriever::build(&split.icl_pool, &cfg.retrieval.bm25)?;
    for (label, index) in &retriever.indexes {
        let path = layout.index_dir().join(format!("{label}.json"));
        index.save(&path)?;
        println!("{label}: {} documents -> {}", index.len(), path.display());
    }
    Ok(())
}

fn load_retriever(dir: &Path) -> Result<ExampleRetriever, CliError> {
    let mut retriever = ExampleRetriever::default();
    let entries =
        std::fs::read_dir(dir).map_err(|e| CliError::Data(format!("{}: {e} (run `index` first)", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for path in paths.into_iter().filter(|p| p.extension().is_some_and(|e| e == "json")) {
        let label = DialectLabel::new(path.file_stem().expect("file name").to_string_lossy());
        retriever.indexes.insert(label, Bm25Index::load(&path)?);
    }
    Ok(retriever)
}

fn load_classifier(cfg: &ExperimentConfig) -> Result<Model, CliError> {
    let path = cfg.classifier.model.clone().unwrap_or_else(|| cfg.layout().ensemble());
    load_model(&path).map_err(|e| CliError::Data(format!("{}: {e} (run `ensemble-search` first)", path.display())))
}

fn file_stem(model: &str, method: &str) -> String {
    let clean = |s: &str| {
        s.chars().map(|c| if c.is_ascii_alphanumeric() || "+-_.".contains(c) { c } else { '_' }).collect::<String>()
    };
    format!("{}__{}", clean(model), clean(method))
}

pub fn cmd_refine(
    cfg: &ExperimentConfig,
    methods: &[String],
    dialect: Option<&str>,
    test: Option<&Path>,
) -> Result<(), CliError> {
    let layout = cfg.layout();
    let selected: Vec<MethodConfig> = if methods.is_empty() {
        cfg.methods.clone()
    } else {
        methods
            .iter()
            .map(|name| {
                cfg.methods
                    .iter()
                    .find(|m| &m.name() == name)
                    .cloned()
                    .ok_or_else(|| CliError::Config(format!("method {name} is not configured")))
            })
            .collect::<Result<_, _>>()?
    };
    let mut items = match test {
        Some(p) => corpus::read_records(p)?,
        None => SplitDataset::read_dir(&layout.split_dir())?.test,
    };
    if let Some(d) = dialect {
        items.retain(|r| r.label.as_str() == d);
        if items.is_empty() {
            return Err(CliError::Data(format!("no test items for dialect {d}")));
        }
    }
    let classifier = load_classifier(cfg)?;
    let needs_index = selected.iter().any(|m| m.prompt_mode == crate::engine::PromptMode::InContext);
    let retriever = if needs_index { Some(load_retriever(&layout.index_dir())?) } else { None };
    let backend = cfg.backend.build().map_err(|e| CliError::Config(e.to_string()))?;
    let options = cfg.run_options();

    let mut reports = Vec::new();
    for method in &selected {
        let (traces, summary) =
            run_method(&items, backend.as_ref(), &classifier, retriever.as_ref(), method, &options)?;
        let path = layout.trace_dir().join(format!("{}.jsonl", file_stem(backend.name(), &method.name())));
        jsonl::write(&path, &traces)?;
        println!(
            "{} {}: TDR {:.3} DFS {:.3} attempts {:.2} -> {}",
            summary.model,
            summary.method,
            summary.tdr,
            summary.dfs_mean,
            summary.mean_attempts,
            path.display()
        );
        reports.push(summary);
    }
    print!("{}", MetricReport::to_markdown(&reports));
    Ok(())
}

/// One row of `evaluate` input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalInput {
    pub variant: String,
    pub hypothesis: String,
    pub reference: String,
    #[serde(default)]
    pub source: Option<String>,
}

/// Per-row BLEU, chrF++, DFS and predicted label.
pub fn evaluate_rows(
    rows: &[EvalInput],
    classifier: Option<&dyn Classify>,
    mode: EmbeddingMode,
) -> Result<Vec<MetricRow>, CliError> {
    rows.iter()
        .map(|r| {
            let (dfs, prediction) = match (classifier, &r.source) {
                (Some(c), Some(src)) => {
                    let e = |t: &str| c.embed(t, mode);
                    let d = dfs_slices(&e(&r.hypothesis), &e(&r.reference), &e(src), DFS_EPSILON)?;
                    (d, c.predict_proba(&r.hypothesis).label.to_string())
                }
                (Some(c), None) => (f64::NAN, c.predict_proba(&r.hypothesis).label.to_string()),
                (None, _) => (f64::NAN, "-".into()),
            };
            Ok(MetricRow {
                variant: r.variant.clone(),
                hypothesis: r.hypothesis.clone(),
                bleu: bleu(&[&r.hypothesis], &[&r.reference], &BleuConfig::default())?,
                chrf_pp: chrf_pp(&[&r.hypothesis], &[&r.reference])?,
                dfs,
                prediction,
            })
        })
        .collect()
}

pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    input: &Path,
    mode: EmbeddingMode,
    dialect: Option<&str>,
) -> Result<(), CliError> {
    let mut rows: Vec<EvalInput> = jsonl::read(input)?;
    if let Some(d) = dialect {
        rows.retain(|r| r.variant.contains(d));
    }
    let classifier = load_classifier(cfg).ok();
    let out = evaluate_rows(&rows, classifier.as_ref().map(|m| m as &dyn Classify), mode)?;
    let dir = cfg.layout().report_dir();
    write_file(&dir.join("evaluate.csv"), &MetricRow::to_csv(&out))?;
    write_file(&dir.join("evaluate.md"), &MetricRow::to_markdown(&out))?;
    print!("{}", MetricRow::to_markdown(&out));
    Ok(())
}

fn read_traces(dir: &Path) -> Result<Vec<RefineTrace>, CliError> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| CliError::Data(format!("{}: {e} (run `refine` first)", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.retain(|p| p.extension().is_some_and(|e| e == "jsonl"));
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        out.extend(jsonl::read::<RefineTrace>(&p)?);
    }
    if out.is_empty() {
        return Err(CliError::Data(format!("no traces under {}", dir.display())));
    }
    Ok(out)
}

pub fn cmd_report(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let layout = cfg.layout();
    let sets = report::group_traces(read_traces(&layout.trace_dir())?);
    let footer = RunMetadata::from_config(cfg).footer();
    let summaries = report::summaries(&sets)?;
    let table = MethodTable::from_reports(&summaries);
    let dir = layout.report_dir();
    write_file(&dir.join("summary.csv"), &MetricReport::to_csv(&summaries))?;
    write_file(&dir.join("table5.csv"), &table.to_csv())?;
    write_file(&dir.join("table5.md"), &format!("{}{footer}", table.to_markdown()))?;
    print!("{}", table.to_markdown());

    let multi_method = sets.values().all(|m| m.len() >= 2);
    if multi_method {
        match report::hard_subset_table(&sets) {
            Ok(rows) => {
                write_file(&dir.join("table6.csv"), &report::hard_subset_csv(&rows))?;
                write_file(&dir.join("table6.md"), &format!("{}{footer}", report::hard_subset_markdown(&rows)))?;
                println!();
                print!("{}", report::hard_subset_markdown(&rows));
            }
            Err(EngineError::Config(m)) => println!("hard subset skipped: {m}"),
            Err(e) => return Err(e.into()),
        }
    }
    print!("{footer}");
    Ok(())
}

pub fn cmd_hard_subset(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let layout = cfg.layout();
    let sets = report::group_traces(read_traces(&layout.trace_dir())?);
    let subsets = report::hard_subsets(&sets)?;
    let ids: BTreeSet<&str> = subsets.values().flatten().map(String::as_str).collect();
    let test = SplitDataset::read_dir(&layout.split_dir())?.test;
    let records: Vec<CorpusRecord> = test.into_iter().filter(|r| ids.contains(r.id.as_str())).collect();
    corpus::write_records(&layout.hard_subset(), &records)?;
    for (model, items) in &subsets {
        println!("{model}: {} items", items.len());
    }
    println!("{} distinct items -> {}", records.len(), layout.hard_subset().display());
    Ok(())
}
