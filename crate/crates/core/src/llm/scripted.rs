use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, GenerationRequest};
use crate::engine::prompt;
use crate::seed;
use crate::synthlang::{apply_dialect_with_rng, default_specs, validate_specs, SyntheticDialectSpec};

fn default_name() -> String {
    "scripted".into()
}

/// Behaviour of a simulated translator.
///
/// Each completion rewrites the source's rule sites with probability
/// `p = clamp(p_base + icl_boost·[examples] + feedback_boost·(attempt − 1)·[feedback])`.
/// With probability `confusion_p` the rules of a different, uniformly drawn
/// dialect are used instead of the target's.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptedPersona {
    #[serde(default = "default_name")]
    pub name: String,
    pub p_base: f64,
    pub feedback_boost: f64,
    pub icl_boost: f64,
    pub confusion_p: f64,
    #[serde(default = "default_specs")]
    pub dialect_specs: Vec<SyntheticDialectSpec>,
}

impl ScriptedPersona {
    /// Weak base rate that responds to examples and feedback.
    pub fn responsive() -> Self {
        Self {
            name: "responsive".into(),
            p_base: 0.1,
            feedback_boost: 0.2,
            icl_boost: 0.3,
            confusion_p: 0.1,
            dialect_specs: default_specs(),
        }
    }

    /// Mostly copies the source regardless of prompting.
    pub fn copier() -> Self {
        Self {
            name: "copier".into(),
            p_base: 0.02,
            feedback_boost: 0.02,
            icl_boost: 0.02,
            confusion_p: 0.0,
            dialect_specs: default_specs(),
        }
    }

    /// Always applies every target rule.
    pub fn perfect() -> Self {
        Self {
            name: "perfect".into(),
            p_base: 1.0,
            feedback_boost: 0.0,
            icl_boost: 0.0,
            confusion_p: 0.0,
            dialect_specs: default_specs(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let unit = [self.p_base, self.feedback_boost, self.icl_boost, self.confusion_p];
        if unit.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(BackendError::InvalidRequest("persona probabilities must lie in [0, 1]".into()));
        }
        if self.p_base + 2.0 * self.feedback_boost + self.icl_boost > 1.0 + 1e-12 {
            return Err(BackendError::InvalidRequest("p_base + 2·feedback_boost + icl_boost must not exceed 1".into()));
        }
        validate_specs(&self.dialect_specs).map_err(|e| BackendError::InvalidRequest(e.to_string()))
    }

    /// Rule-application probability for a prompt.
    pub fn apply_probability(&self, has_examples: bool, has_feedback: bool, attempt: usize) -> f64 {
        let mut p = self.p_base;
        if has_examples {
            p += self.icl_boost;
        }
        if has_feedback {
            p += self.feedback_boost * attempt.saturating_sub(1) as f64;
        }
        p.clamp(0.0, 1.0)
    }
}

/// Deterministic backend driven by a [`ScriptedPersona`]; reads the prompt the
/// same way a model would see it.
#[derive(Clone, Debug)]
pub struct ScriptedBackend {
    persona: ScriptedPersona,
}

impl ScriptedBackend {
    pub fn new(persona: ScriptedPersona) -> Result<Self, BackendError> {
        persona.validate()?;
        Ok(Self { persona })
    }

    pub fn persona(&self) -> &ScriptedPersona {
        &self.persona
    }
}

/// Seed of candidate `index` within a request.
pub fn candidate_seed(request_seed: u64, index: usize) -> u64 {
    seed::derive(request_seed, &[&"candidate", &index])
}

impl Backend for ScriptedBackend {
    fn name(&self) -> &str {
        &self.persona.name
    }

    fn generate(&self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        req.validate()?;
        let target = prompt::parse_target(&req.system)
            .ok_or_else(|| BackendError::InvalidRequest("system prompt names no target".into()))?;
        let source = prompt::parse_source(&req.user)
            .ok_or_else(|| BackendError::InvalidRequest("user prompt has no input sentence".into()))?;
        let specs = &self.persona.dialect_specs;
        let t = specs
            .iter()
            .position(|s| s.name.as_str() == target)
            .ok_or_else(|| BackendError::InvalidRequest(format!("no rules for dialect {target:?}")))?;
        let p = self.persona.apply_probability(
            prompt::has_examples(&req.user),
            prompt::has_feedback(&req.user),
            req.attempt,
        );
        Ok((0..req.n)
            .map(|c| {
                let mut rng = seed::rng(candidate_seed(req.seed, c));
                // always drawn so the rewrite draws line up across personas
                let u_conf: f64 = rng.random();
                let spec = if u_conf < self.persona.confusion_p && specs.len() > 1 {
                    let k = rng.random_range(0..specs.len() - 1);
                    &specs[if k >= t { k + 1 } else { k }]
                } else {
                    &specs[t]
                };
                apply_dialect_with_rng(source, spec, p, &mut rng).0
            })
            .collect())
    }
}
