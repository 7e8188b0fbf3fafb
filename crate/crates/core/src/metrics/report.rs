use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{bleu, chrf_pp, tdr, BleuConfig, MetricsError};
use crate::label::DialectLabel;

/// Aggregate scores for one method on one dialect (or `All`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub method: String,
    pub dialect: String,
    pub items: usize,
    pub chrf_pp: f64,
    pub bleu: f64,
    pub dfs_mean: f64,
    pub tdr: f64,
    pub mean_attempts: f64,
}

impl MetricReport {
    /// Scores hypotheses against dialect references.
    ///
    /// `dfs` holds one score per item, `predictions` the classifier label of
    /// each hypothesis and `attempts` the attempts spent per item.
    #[allow(clippy::too_many_arguments)]
    pub fn compute(
        model: &str,
        method: &str,
        target: &DialectLabel,
        hypotheses: &[&str],
        references: &[&str],
        dfs: &[f64],
        predictions: &[DialectLabel],
        attempts: &[usize],
    ) -> Result<Self, MetricsError> {
        let tdr = tdr(predictions, target)?;
        let n = hypotheses.len();
        if dfs.len() != n || predictions.len() != n || attempts.len() != n {
            return Err(MetricsError::LengthMismatch { hypotheses: n, references: dfs.len() });
        }
        Ok(Self {
            model: model.to_owned(),
            method: method.to_owned(),
            dialect: target.to_string(),
            items: n,
            chrf_pp: chrf_pp(hypotheses, references)?,
            bleu: bleu(hypotheses, references, &BleuConfig::default())?,
            dfs_mean: dfs.iter().sum::<f64>() / n as f64,
            tdr,
            mean_attempts: attempts.iter().sum::<usize>() as f64 / n as f64,
        })
    }

    pub fn to_csv(rows: &[MetricReport]) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).expect("metric rows serialize");
        }
        if rows.is_empty() {
            w.write_record([
                "model",
                "method",
                "dialect",
                "items",
                "chrf_pp",
                "bleu",
                "dfs_mean",
                "tdr",
                "mean_attempts",
            ])
            .expect("header");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
    }

    pub fn to_markdown(rows: &[MetricReport]) -> String {
        let mut out = String::from(
            "| Model | Method | Dialect | Items | chrF++ | BLEU | DFS | TDR | Attempts |\n\
             |---|---|---|---:|---:|---:|---:|---:|---:|\n",
        );
        for r in rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {:.2} | {:.2} | {:.3} | {:.2} | {:.2} |",
                r.model, r.method, r.dialect, r.items, r.chrf_pp, r.bleu, r.dfs_mean, r.tdr, r.mean_attempts
            );
        }
        out
    }
}

/// Per-hypothesis scores in the layout `Variant | BLEU | chrF++ | DFS`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub variant: String,
    pub hypothesis: String,
    pub bleu: f64,
    pub chrf_pp: f64,
    pub dfs: f64,
    pub prediction: String,
}

impl MetricRow {
    pub fn to_csv(rows: &[MetricRow]) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).expect("rows serialize");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
    }

    pub fn to_markdown(rows: &[MetricRow]) -> String {
        let mut out =
            String::from("| Variant | Hypothesis | BLEU | chrF++ | DFS | Prediction |\n|---|---|---:|---:|---:|---|\n");
        for r in rows {
            let _ = writeln!(
                out,
                "| {} | {} | {:.2} | {:.2} | {:.3} | {} |",
                r.variant, r.hypothesis, r.bleu, r.chrf_pp, r.dfs, r.prediction
            );
        }
        out
    }
}
