//! Hashed character n-gram features.

use serde::{Deserialize, Serialize};

use crate::seed::fnv1a64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub hash_dim: usize,
    pub use_word_unigrams: bool,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        Self { ngram_min: 1, ngram_max: 4, hash_dim: 1 << 16, use_word_unigrams: false }
    }
}

impl FeaturizerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(1 <= self.ngram_min && self.ngram_min <= self.ngram_max && self.ngram_max <= 8) {
            return Err(format!("n-gram range [{}, {}] outside 1..=8", self.ngram_min, self.ngram_max));
        }
        if !self.hash_dim.is_power_of_two() || self.hash_dim > u32::MAX as usize {
            return Err(format!("hash_dim {} is not a power of two", self.hash_dim));
        }
        Ok(())
    }

    /// Bucket of a character n-gram.
    pub fn char_bucket(&self, ngram: &str) -> u32 {
        (fnv1a64(ngram.as_bytes()) & (self.hash_dim as u64 - 1)) as u32
    }

    /// Bucket of a word unigram; tagged so it never shares a hash with the
    /// identical character n-gram.
    pub fn word_bucket(&self, word: &str) -> u32 {
        let h = crate::seed::fnv1a(fnv1a64(b"\x00w:"), word.as_bytes());
        (h & (self.hash_dim as u64 - 1)) as u32
    }
}

/// Sparse vector as `(index, value)` pairs sorted by index, no duplicates.
pub type SparseVector = Vec<(u32, f64)>;

/// Term frequencies of hashed character n-grams (and optionally word
/// unigrams). N-grams run over the raw Unicode scalar sequence, spaces included.
pub fn featurize(config: &FeaturizerConfig, text: &str) -> SparseVector {
    let chars: Vec<char> = text.chars().collect();
    let mut buckets: Vec<u32> = Vec::new();
    let mut gram = String::new();
    for n in config.ngram_min..=config.ngram_max {
        for window in chars.windows(n) {
            gram.clear();
            gram.extend(window);
            buckets.push(config.char_bucket(&gram));
        }
    }
    if config.use_word_unigrams {
        buckets.extend(text.split_whitespace().map(|w| config.word_bucket(w)));
    }
    buckets.sort_unstable();
    let mut out: SparseVector = Vec::new();
    for b in buckets {
        match out.last_mut() {
            Some((idx, count)) if *idx == b => *count += 1.0,
            _ => out.push((b, 1.0)),
        }
    }
    out
}

/// Scales a sparse vector to unit L2 norm; the zero vector is returned as is.
pub fn l2_normalize(mut v: SparseVector) -> SparseVector {
    let norm = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, x) in &mut v {
            *x /= norm;
        }
    }
    v
}
