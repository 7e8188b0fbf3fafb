use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::{check_lengths, MetricsError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChrfConfig {
    pub char_order: usize,
    pub word_order: usize,
    pub beta: f64,
}

impl Default for ChrfConfig {
    /// chrF++: character 6-grams, word bigrams, recall weighted by beta = 2.
    fn default() -> Self {
        Self { char_order: 6, word_order: 2, beta: 2.0 }
    }
}

/// (hypothesis n-grams, reference n-grams, matches) for one order.
type OrderStats = [usize; 3];

fn overlap<T: Hash + Eq>(hyp: Vec<T>, reference: Vec<T>) -> OrderStats {
    let (h, r) = (hyp.len(), reference.len());
    let mut counts: HashMap<T, usize> = HashMap::new();
    for g in reference {
        *counts.entry(g).or_insert(0) += 1;
    }
    let mut matched = 0;
    for g in hyp {
        if let Some(c) = counts.get_mut(&g) {
            if *c > 0 {
                *c -= 1;
                matched += 1;
            }
        }
    }
    [h, r, matched]
}

fn char_ngrams(chars: &[char], n: usize) -> Vec<&[char]> {
    chars.windows(n).collect()
}

/// Splits on whitespace and detaches a leading or trailing ASCII punctuation mark.
fn words(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for tok in text.split_whitespace() {
        let n = tok.chars().count();
        let last = tok.chars().last().expect("non-empty token");
        let first = tok.chars().next().expect("non-empty token");
        if n > 1 && last.is_ascii_punctuation() {
            let cut = tok.len() - last.len_utf8();
            out.push(&tok[..cut]);
            out.push(&tok[cut..]);
        } else if n > 1 && first.is_ascii_punctuation() {
            let cut = first.len_utf8();
            out.push(&tok[..cut]);
            out.push(&tok[cut..]);
        } else {
            out.push(tok);
        }
    }
    out
}

fn sentence_stats(hyp: &str, reference: &str, config: &ChrfConfig) -> Vec<OrderStats> {
    let hc: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
    let rc: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    let mut stats: Vec<OrderStats> =
        (1..=config.char_order).map(|n| overlap(char_ngrams(&hc, n), char_ngrams(&rc, n))).collect();
    let hw = words(hyp);
    let rw = words(reference);
    stats.extend((1..=config.word_order).map(|n| overlap(hw.windows(n).collect(), rw.windows(n).collect())));
    stats
}

/// Corpus-level character n-gram F-score on a 0–100 scale.
///
/// Statistics are summed over sentence pairs; precision and recall are
/// averaged over the character and word orders for which both sides have
/// n-grams, then combined into an F-beta score.
pub fn chrf_with<H: AsRef<str>, R: AsRef<str>>(
    hypotheses: &[H],
    references: &[R],
    config: &ChrfConfig,
) -> Result<f64, MetricsError> {
    check_lengths(hypotheses.len(), references.len())?;
    let orders = config.char_order + config.word_order;
    let mut totals: Vec<OrderStats> = vec![[0; 3]; orders];
    for (h, r) in hypotheses.iter().zip(references) {
        for (acc, s) in totals.iter_mut().zip(sentence_stats(h.as_ref(), r.as_ref(), config)) {
            for k in 0..3 {
                acc[k] += s[k];
            }
        }
    }
    let (mut precision, mut recall, mut effective) = (0.0, 0.0, 0usize);
    for [h, r, m] in totals {
        if h > 0 && r > 0 {
            precision += m as f64 / h as f64;
            recall += m as f64 / r as f64;
            effective += 1;
        }
    }
    if effective == 0 {
        return Ok(0.0);
    }
    precision /= effective as f64;
    recall /= effective as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    let b2 = config.beta * config.beta;
    Ok(100.0 * (1.0 + b2) * precision * recall / (b2 * precision + recall))
}

/// chrF++ with the default configuration.
pub fn chrf_pp<H: AsRef<str>, R: AsRef<str>>(hypotheses: &[H], references: &[R]) -> Result<f64, MetricsError> {
    chrf_with(hypotheses, references, &ChrfConfig::default())
}
