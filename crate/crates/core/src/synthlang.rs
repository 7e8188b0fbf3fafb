//! Synthetic standard language and rule-defined dialects.
//!
//! A standard sentence is a run of content words closed by one predicate,
//! `stem + ending`, whose ending comes from a small closed set; some sentences
//! open with a function word. Dialects rewrite predicate endings (suffix
//! rules) and swap function words for dialect-only marker tokens (token
//! rules), so dialect features are sparse and sit at the sentence edges.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusRecord;
use crate::label::DialectLabel;
use crate::seed;

/// Endings carried by predicates.
pub const STANDARD_ENDINGS: [&str; 6] = ["da", "ta", "ni", "yo", "go", "ra"];
/// Function words that token rules replace.
pub const FUNCTION_WORDS: [&str; 3] = ["geu", "jeo", "mwo"];

const CONSONANTS: [char; 9] = ['b', 'd', 'g', 'j', 'k', 'm', 'n', 's', 't'];
const VOWELS: [char; 5] = ['a', 'e', 'i', 'o', 'u'];
const CODAS: [char; 4] = ['n', 'm', 'l', 'k'];
/// Chance that a sentence opens with a function word.
const FUNCTION_WORD_RATE: f64 = 0.2;
/// Share of the non-function vocabulary that are predicates.
const PREDICATE_SHARE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// Rewrites a token ending.
    Suffix,
    /// Replaces a whole token.
    Token,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteRule {
    pub pattern: String,
    pub replacement: String,
    pub kind: RuleKind,
}

impl RewriteRule {
    pub fn suffix(pattern: &str, replacement: &str) -> Self {
        Self { pattern: pattern.into(), replacement: replacement.into(), kind: RuleKind::Suffix }
    }

    pub fn token(pattern: &str, replacement: &str) -> Self {
        Self { pattern: pattern.into(), replacement: replacement.into(), kind: RuleKind::Token }
    }

    fn rewrite(&self, token: &str) -> Option<String> {
        match self.kind {
            RuleKind::Token => (token == self.pattern).then(|| self.replacement.clone()),
            RuleKind::Suffix => (token.len() > self.pattern.len() && token.ends_with(&self.pattern))
                .then(|| format!("{}{}", &token[..token.len() - self.pattern.len()], self.replacement)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticDialectSpec {
    pub name: DialectLabel,
    pub rules: Vec<RewriteRule>,
    pub marker_tokens: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("dialect {dialect}: {reason}")]
    InvalidSpec { dialect: String, reason: String },
    #[error("marker token {token:?} appears in both {first} and {second}")]
    SharedMarker { token: String, first: String, second: String },
    #[error("invalid synthesis parameters: {0}")]
    InvalidParams(String),
    #[error("spec file {path}: {message}")]
    SpecFile { path: String, message: String },
}

impl SyntheticDialectSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let invalid = |reason: String| SynthError::InvalidSpec { dialect: self.name.to_string(), reason };
        let mut patterns = HashSet::new();
        for rule in &self.rules {
            if rule.pattern.is_empty() {
                return Err(invalid("empty rule pattern".into()));
            }
            if rule.pattern == rule.replacement {
                return Err(invalid(format!("rule {:?} rewrites to itself", rule.pattern)));
            }
            if !patterns.insert((rule.kind, rule.pattern.as_str())) {
                return Err(invalid(format!("duplicate rule pattern {:?}", rule.pattern)));
            }
        }
        Ok(())
    }

    /// Rule applying to `token`: token rules first, then the longest matching suffix.
    fn rule_for(&self, token: &str) -> Option<&RewriteRule> {
        self.rules
            .iter()
            .filter(|r| r.kind == RuleKind::Token && r.pattern == token)
            .chain({
                let mut suffixes: Vec<&RewriteRule> =
                    self.rules.iter().filter(|r| r.kind == RuleKind::Suffix && r.rewrite(token).is_some()).collect();
                suffixes.sort_by_key(|r| std::cmp::Reverse(r.pattern.len()));
                suffixes
            })
            .next()
    }
}

/// Checks every spec and that marker tokens are disjoint across specs.
pub fn validate_specs(specs: &[SyntheticDialectSpec]) -> Result<(), SynthError> {
    let mut owners: std::collections::HashMap<&str, &DialectLabel> = Default::default();
    for spec in specs {
        spec.validate()?;
        for m in &spec.marker_tokens {
            if let Some(first) = owners.insert(m.as_str(), &spec.name) {
                if first != &spec.name {
                    return Err(SynthError::SharedMarker {
                        token: m.clone(),
                        first: first.to_string(),
                        second: spec.name.to_string(),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Three dialects with four suffix rules and three marker tokens each.
pub fn default_specs() -> Vec<SyntheticDialectSpec> {
    let spec = |name: &str, suffixes: [(&str, &str); 4], markers: [&str; 3]| {
        let mut rules: Vec<RewriteRule> = suffixes.iter().map(|(p, r)| RewriteRule::suffix(p, r)).collect();
        rules.extend(FUNCTION_WORDS.iter().zip(markers).map(|(p, m)| RewriteRule::token(p, m)));
        SyntheticDialectSpec {
            name: DialectLabel::new(name),
            rules,
            marker_tokens: markers.iter().map(|m| m.to_string()).collect(),
        }
    };
    vec![
        spec(
            "Gyeongsang",
            [("da", "deqxonoqxe"), ("go", "gyeqxomeqxe"), ("ni", "neqxisoqxe"), ("ta", "teqxuboqxe")],
            ["guqxeomel", "juqxeomel", "muqxeomel"],
        ),
        spec(
            "Jeju",
            [("ta", "tzumehsuzeh"), ("yo", "yzusehmezeh"), ("go", "gzohehmuzeh"), ("ra", "rzumehsizeh")],
            ["gzehmuzeh", "jzehmuzeh", "mzehmuzeh"],
        ),
        spec(
            "Jeolla",
            [("da", "deungkewaq"), ("yo", "yewkawngke"), ("ni", "nekkewngwaq"), ("ra", "rengwekkew")],
            ["gwaqkkewng", "jwaqkkewng", "mwaqkkewng"],
        ),
    ]
}

/// Sizes of the synthetic language.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub vocab_size: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { vocab_size: 200, min_tokens: 8, max_tokens: 14 }
    }
}

fn syllables(rng: &mut impl Rng, max: usize) -> String {
    let mut w = String::new();
    for _ in 0..rng.random_range(1..=max) {
        w.push(*CONSONANTS.choose(rng).expect("non-empty"));
        w.push(*VOWELS.choose(rng).expect("non-empty"));
    }
    w
}

fn is_predicate(word: &str) -> bool {
    STANDARD_ENDINGS.iter().any(|e| word.len() > e.len() && word.ends_with(e))
}

/// Builds `vocab_size` distinct words: the function words, a quarter of the
/// rest as predicates (`stem + ending`), then content words that end in no
/// standard ending.
pub fn generate_vocabulary(vocab_size: usize, seed: u64) -> Result<Vec<String>, SynthError> {
    if vocab_size < 10 {
        return Err(SynthError::InvalidParams(format!("vocab_size {vocab_size} < 10")));
    }
    let mut rng = seed::rng(seed::derive(seed, &[&"vocabulary"]));
    let mut seen: BTreeSet<String> = FUNCTION_WORDS.iter().map(|w| w.to_string()).collect();
    let mut words: Vec<String> = FUNCTION_WORDS.iter().map(|w| w.to_string()).collect();
    let predicates = ((vocab_size - FUNCTION_WORDS.len()) / PREDICATE_SHARE).max(1);
    let mut failures = 0usize;
    while words.len() < vocab_size {
        let w = if words.len() < FUNCTION_WORDS.len() + predicates {
            let mut w = syllables(&mut rng, 2);
            w.push_str(STANDARD_ENDINGS.choose(&mut rng).expect("non-empty"));
            w
        } else {
            let mut w = syllables(&mut rng, 2);
            if rng.random_bool(0.5) {
                w.push(*CODAS.choose(&mut rng).expect("non-empty"));
            }
            w
        };
        let kind_ok = is_predicate(&w) == (words.len() < FUNCTION_WORDS.len() + predicates);
        if kind_ok && seen.insert(w.clone()) {
            words.push(w);
        } else {
            failures += 1;
            if failures > 100 * vocab_size {
                return Err(SynthError::InvalidParams(format!("cannot build {vocab_size} distinct words")));
            }
        }
    }
    Ok(words)
}

/// Draws sentences over a fixed vocabulary: an optional leading function
/// word, content words, and a closing predicate.
#[derive(Clone, Debug)]
pub struct SentenceSampler {
    function_words: Vec<String>,
    content_words: Vec<String>,
    predicates: Vec<String>,
    min_tokens: usize,
    max_tokens: usize,
}

impl SentenceSampler {
    pub fn new(vocab: Vec<String>, min_tokens: usize, max_tokens: usize) -> Result<Self, SynthError> {
        if min_tokens == 0 || min_tokens > max_tokens {
            return Err(SynthError::InvalidParams(format!("bad length range [{min_tokens}, {max_tokens}]")));
        }
        let (function_words, rest): (Vec<String>, Vec<String>) =
            vocab.into_iter().partition(|w| FUNCTION_WORDS.contains(&w.as_str()));
        let (predicates, content_words): (Vec<String>, Vec<String>) = rest.into_iter().partition(|w| is_predicate(w));
        if predicates.is_empty() || content_words.is_empty() {
            return Err(SynthError::InvalidParams("vocabulary needs predicates and content words".into()));
        }
        Ok(Self { function_words, content_words, predicates, min_tokens, max_tokens })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> String {
        let len = rng.random_range(self.min_tokens..=self.max_tokens);
        let mut tokens = Vec::with_capacity(len);
        if len > 1 && !self.function_words.is_empty() && rng.random::<f64>() < FUNCTION_WORD_RATE {
            tokens.push(self.function_words.choose(rng).expect("non-empty").as_str());
        }
        while tokens.len() + 1 < len {
            tokens.push(self.content_words.choose(rng).expect("non-empty").as_str());
        }
        tokens.push(self.predicates.choose(rng).expect("non-empty").as_str());
        tokens.join(" ")
    }
}

/// Seeded standard-language sentences with token counts in `[min, max]`.
pub fn generate_standard_corpus(
    vocab_size: usize,
    sentence_count: usize,
    length_range: (usize, usize),
    seed: u64,
) -> Result<Vec<String>, SynthError> {
    let sampler = SentenceSampler::new(generate_vocabulary(vocab_size, seed)?, length_range.0, length_range.1)?;
    let mut rng = seed::rng(seed::derive(seed, &[&"sentences"]));
    Ok((0..sentence_count).map(|_| sampler.sample(&mut rng)).collect())
}

/// Rewrites each rule site independently with probability `p_apply`.
///
/// Exactly one uniform draw is consumed per token whether or not it matches,
/// so the same seed yields nested rewrite sets as `p_apply` grows. Returns
/// the output and the number of rewritten sites. With no rewrites the input
/// is returned verbatim.
pub fn apply_dialect_with_rng(
    sentence: &str,
    spec: &SyntheticDialectSpec,
    p_apply: f64,
    rng: &mut impl Rng,
) -> (String, usize) {
    let mut rewrites = 0;
    let tokens: Vec<String> = sentence
        .split_whitespace()
        .map(|tok| {
            let u: f64 = rng.random();
            match spec.rule_for(tok) {
                Some(rule) if u < p_apply => {
                    rewrites += 1;
                    rule.rewrite(tok).expect("rule matched")
                }
                _ => tok.to_owned(),
            }
        })
        .collect();
    if rewrites == 0 {
        (sentence.to_owned(), 0)
    } else {
        (tokens.join(" "), rewrites)
    }
}

pub fn apply_dialect(sentence: &str, spec: &SyntheticDialectSpec, p_apply: f64, seed: u64) -> String {
    let mut rng = seed::rng(seed::derive(seed, &[&"apply_dialect"]));
    apply_dialect_with_rng(sentence, spec, p_apply, &mut rng).0
}

/// Number of tokens in `sentence` that some rule of `spec` matches.
pub fn rule_sites(sentence: &str, spec: &SyntheticDialectSpec) -> usize {
    sentence.split_whitespace().filter(|t| spec.rule_for(t).is_some()).count()
}

/// Rewrites the first site of `first`, then every later site of `second`.
fn mix_dialects(sentence: &str, first: &SyntheticDialectSpec, second: &SyntheticDialectSpec) -> (String, usize, usize) {
    let (mut a, mut b) = (0, 0);
    let tokens: Vec<String> = sentence
        .split_whitespace()
        .map(|tok| {
            let (spec, counter) = if a == 0 { (first, &mut a) } else { (second, &mut b) };
            match spec.rule_for(tok) {
                Some(rule) => {
                    *counter += 1;
                    rule.rewrite(tok).expect("rule matched")
                }
                None => tok.to_owned(),
            }
        })
        .collect();
    (tokens.join(" "), a, b)
}

pub fn generate_labeled_corpus(
    specs: &[SyntheticDialectSpec],
    per_class: usize,
    seed: u64,
) -> Result<Vec<CorpusRecord>, SynthError> {
    generate_labeled_corpus_with(specs, per_class, &SynthConfig::default(), seed)
}

/// `per_class` records for each dialect (every site rewritten, at least one
/// site), `Standard` (unmodified) and `Unknown` (two distinct dialects mixed
/// in one sentence).
pub fn generate_labeled_corpus_with(
    specs: &[SyntheticDialectSpec],
    per_class: usize,
    config: &SynthConfig,
    seed: u64,
) -> Result<Vec<CorpusRecord>, SynthError> {
    if specs.len() < 2 {
        return Err(SynthError::InvalidParams("need at least two dialect specs".into()));
    }
    validate_specs(specs)?;
    let sampler =
        SentenceSampler::new(generate_vocabulary(config.vocab_size, seed)?, config.min_tokens, config.max_tokens)?;
    let mut rng = seed::rng(seed::derive(seed, &[&"labeled_corpus"]));
    let mut out = Vec::with_capacity(per_class * (specs.len() + 2));

    for spec in specs {
        for i in 0..per_class {
            // resample until the dialect leaves a mark
            let (standard, dialect) = loop {
                let s = sampler.sample(&mut rng);
                let (d, rewrites) = apply_dialect_with_rng(&s, spec, 1.0, &mut rng);
                if rewrites > 0 {
                    break (s, d);
                }
            };
            out.push(CorpusRecord::new(format!("{}-{i:05}", spec.name), standard, dialect, spec.name.clone()));
        }
    }
    for i in 0..per_class {
        let s = sampler.sample(&mut rng);
        out.push(CorpusRecord::new(format!("Standard-{i:05}"), s.clone(), s, DialectLabel::standard()));
    }
    for i in 0..per_class {
        let first = rng.random_range(0..specs.len());
        let second = (first + rng.random_range(1..specs.len())) % specs.len();
        let (standard, mixed) = loop {
            let s = sampler.sample(&mut rng);
            let (mixed, a, b) = mix_dialects(&s, &specs[first], &specs[second]);
            if a > 0 && b > 0 {
                break (s, mixed);
            }
        };
        out.push(CorpusRecord::new(format!("Unknown-{i:05}"), standard, mixed, DialectLabel::unknown()));
    }
    Ok(out)
}

/// On-disk list of dialect specs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecFile {
    pub dialects: Vec<SyntheticDialectSpec>,
}

impl SpecFile {
    pub fn load(path: &Path) -> Result<Vec<SyntheticDialectSpec>, SynthError> {
        let err = |message: String| SynthError::SpecFile { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let file: SpecFile = toml::from_str(&text).map_err(|e| err(e.to_string()))?;
        validate_specs(&file.dialects)?;
        Ok(file.dialects)
    }

    pub fn to_toml(specs: &[SyntheticDialectSpec]) -> String {
        toml::to_string_pretty(&SpecFile { dialects: specs.to_vec() }).expect("specs serialize")
    }
}
