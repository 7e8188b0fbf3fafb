use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{check_lengths, MetricsError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BleuTokenizer {
    #[default]
    Whitespace,
    /// Every non-space Unicode scalar is a token.
    Char,
}

impl BleuTokenizer {
    fn tokens(self, text: &str) -> Vec<String> {
        match self {
            BleuTokenizer::Whitespace => text.split_whitespace().map(str::to_owned).collect(),
            BleuTokenizer::Char => text.chars().filter(|c| !c.is_whitespace()).map(String::from).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BleuConfig {
    pub max_order: usize,
    pub tokenizer: BleuTokenizer,
    /// Numerator used for an order with zero matches; `None` disables smoothing.
    pub floor: Option<f64>,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self { max_order: 4, tokenizer: BleuTokenizer::Whitespace, floor: Some(0.1) }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// Corpus BLEU on a 0–100 scale: clipped n-gram precisions summed over the
/// corpus, geometric mean over orders 1..=max_order and a brevity penalty.
///
/// Orders for which the hypotheses contain no n-grams at all are left out of
/// the mean. A corpus without a single matching unigram scores 0.
pub fn bleu<H: AsRef<str>, R: AsRef<str>>(
    hypotheses: &[H],
    references: &[R],
    config: &BleuConfig,
) -> Result<f64, MetricsError> {
    check_lengths(hypotheses.len(), references.len())?;
    let max_order = config.max_order.max(1);
    let mut matches = vec![0usize; max_order];
    let mut totals = vec![0usize; max_order];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hypotheses.iter().zip(references) {
        let h = config.tokenizer.tokens(h.as_ref());
        let r = config.tokenizer.tokens(r.as_ref());
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=max_order {
            let ref_counts = ngram_counts(&r, n);
            for (gram, count) in ngram_counts(&h, n) {
                matches[n - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
            totals[n - 1] += h.len().saturating_sub(n - 1);
        }
    }
    if hyp_len == 0 || matches[0] == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    let mut orders = 0usize;
    for n in 0..max_order {
        if totals[n] == 0 {
            continue;
        }
        let numerator = match (matches[n], config.floor) {
            (0, Some(floor)) => floor,
            (0, None) => return Ok(0.0),
            (m, _) => m as f64,
        };
        log_sum += (numerator / totals[n] as f64).ln();
        orders += 1;
    }
    let brevity = if hyp_len < ref_len { (1.0 - ref_len as f64 / hyp_len as f64).exp() } else { 1.0 };
    Ok(100.0 * brevity * (log_sum / orders as f64).exp())
}
