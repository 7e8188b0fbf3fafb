//! Classifier-guided dialect translation refinement.
//!
//! The crate is organised around the refinement pipeline:
//!
//! - [`corpus`]: record curation, splits, salient-term extraction and
//!   hard-negative synthesis.
//! - [`synthlang`]: a synthetic standard language with rule-defined dialects
//!   for desk-scale runs.
//! - [`classifier`]: hashed character n-gram softmax classifiers, posterior
//!   averaging ensembles and exhaustive subset search.
//! - [`metrics`]: DFS, TDR, BLEU and chrF++.
//! - [`retrieval`]: BM25 index over the in-context example pool.
//! - [`llm`]: generation backends (scripted persona and HTTP chat completion).
//! - [`engine`]: prompt construction and the verify / feedback / retry loop.
//! - [`report`] and [`cli`]: experiment reports and the command line.

// `!(x > 0.0)` rejects NaN too, which is the point
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod engine;
pub mod jsonl;
pub mod label;
pub mod llm;
pub mod metrics;
pub mod report;
pub mod retrieval;
pub mod seed;
pub mod synthlang;

pub use classifier::{BaseClassifier, Classify, Ensemble, Model, Prediction};
pub use corpus::CorpusRecord;
pub use label::DialectLabel;
