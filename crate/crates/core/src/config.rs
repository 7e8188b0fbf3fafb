//! Experiment configuration (one TOML file, a section per stage).
//!
//! The global `seed` drives every stage: loading a config re-derives the
//! curation, member training and method seeds from it.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{default_base_configs, FeaturizerConfig, TrainMeta};
use crate::corpus::CurationConfig;
use crate::engine::{MethodConfig, RunOptions};
use crate::llm::{BackendSpec, RetryPolicy};
use crate::retrieval::Bm25Params;
use crate::synthlang::SynthConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config file {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    /// Labeled corpus to curate; defaults to the synthesized one under `out_dir`.
    pub corpus: Option<PathBuf>,
    /// Records per class for `synth`.
    pub synth_per_class: usize,
    pub language: SynthConfig,
    /// TOML list of dialect rule specs; built-in rules when absent.
    pub spec_file: Option<PathBuf>,
    /// Extra salient-term `Unknown` records appended to the training split.
    pub unknown_synth: usize,
    pub curation: CurationConfig,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            corpus: None,
            synth_per_class: 1500,
            language: SynthConfig::default(),
            spec_file: None,
            unknown_synth: 0,
            curation: CurationConfig { per_class_cap: 1000, test_pair_count: 100, ..CurationConfig::default() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberSpec {
    pub featurizer: FeaturizerConfig,
    pub train: TrainMeta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierSection {
    pub members: Vec<MemberSpec>,
    /// Model used by `refine` and `evaluate`; defaults to the searched ensemble.
    pub model: Option<PathBuf>,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        Self {
            members: default_base_configs()
                .into_iter()
                .map(|(featurizer, train)| MemberSpec { featurizer, train })
                .collect(),
            model: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalSection {
    pub bm25: Bm25Params,
    pub icl_k: usize,
}

impl Default for RetrievalSection {
    fn default() -> Self {
        Self { bm25: Bm25Params::default(), icl_k: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataSection,
    pub classifier: ClassifierSection,
    pub retrieval: RetrievalSection,
    pub backend: BackendSpec,
    pub retry: RetryPolicy,
    pub methods: Vec<MethodConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut cfg = Self {
            seed: 1337,
            out_dir: PathBuf::from("runs/default"),
            data: DataSection::default(),
            classifier: ClassifierSection::default(),
            retrieval: RetrievalSection::default(),
            backend: BackendSpec::default(),
            retry: RetryPolicy::default(),
            methods: MethodConfig::default_grid(),
        };
        cfg.apply_seed(cfg.seed);
        cfg
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Invalid(m) => ConfigError::Read { path: path.display().to_string(), message: m },
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.apply_seed(cfg.seed);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Propagates the global seed to every stage.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.data.curation.seed = seed;
        for (i, m) in self.classifier.members.iter_mut().enumerate() {
            m.train.seed = seed.wrapping_add(i as u64);
        }
        for m in &mut self.methods {
            m.seed = seed;
        }
    }

    /// Sets the ICL example count of every method.
    pub fn apply_icl_k(&mut self, k: usize) {
        self.retrieval.icl_k = k;
        for m in &mut self.methods {
            m.icl_k = k;
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let mut names = BTreeSet::new();
        for m in &self.methods {
            m.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if !names.insert(m.name()) {
                return invalid(format!("duplicate method {}", m.name()));
            }
        }
        if self.classifier.members.is_empty() {
            return invalid("classifier.members is empty".into());
        }
        for m in &self.classifier.members {
            m.featurizer.validate().map_err(ConfigError::Invalid)?;
        }
        self.data.curation.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.retrieval.icl_k == 0 {
            return invalid("retrieval.icl_k must be at least 1".into());
        }
        Ok(())
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions { retry: self.retry.clone(), max_inflight: self.backend.max_inflight() }
    }

    pub fn layout(&self) -> Layout {
        Layout { root: self.out_dir.clone() }
    }
}

/// File locations under the output directory.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn corpus(&self) -> PathBuf {
        self.root.join("data/corpus.jsonl")
    }
    pub fn specs(&self) -> PathBuf {
        self.root.join("data/specs.toml")
    }
    pub fn split_dir(&self) -> PathBuf {
        self.root.join("data/split")
    }
    pub fn hard_subset(&self) -> PathBuf {
        self.root.join("data/hard_subset.jsonl")
    }
    pub fn member(&self, i: usize) -> PathBuf {
        self.root.join(format!("models/member-{i}.bin"))
    }
    pub fn ensemble(&self) -> PathBuf {
        self.root.join("models/ensemble.bin")
    }
    pub fn index_dir(&self) -> PathBuf {
        self.root.join("index")
    }
    pub fn trace_dir(&self) -> PathBuf {
        self.root.join("traces")
    }
    pub fn report_dir(&self) -> PathBuf {
        self.root.join("reports")
    }
}
