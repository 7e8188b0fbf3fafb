//! Prompt templates for zero-shot, in-context and feedback prompts.

use serde::{Deserialize, Serialize};

use crate::label::DialectLabel;
use crate::seed;

pub const SYSTEM_TEMPLATE: &str = "You are a translation assistant that translates standard Korean into {DIALECT}.\n\
Output only the translated sentence; do not include any explanations.";

pub const ZERO_SHOT_TEMPLATE: &str = "Input sentence: {SOURCE}\nTranslation:";

pub const EXAMPLE_TEMPLATE: &str = "Example:\nA: {STANDARD_EXAMPLE}\nB: {DIALECT_EXAMPLE}\n\n";

pub const FEEDBACK_TEMPLATE: &str = "[Feedback]\n\
- The previous output was classified as {WRONG_LABEL} instead of the target dialect {DIALECT}.\n\
- Please revise the translation to clearly reflect {DIALECT} features.\n\
- Previous output : {PREV_OUTPUT}\n";

pub const OSCILLATION_TEMPLATE: &str = "The output oscillates between {last_wrong_label} and {wrong_label}.\n\
Please make the {dialect}-specific features more explicit.\n";

/// Literal markers a backend can use to read a prompt back.
pub const SYSTEM_TARGET_PREFIX: &str = "translates standard Korean into ";
pub const SOURCE_PREFIX: &str = "Input sentence: ";
pub const EXAMPLE_MARKER: &str = "Example:\nA: ";
pub const FEEDBACK_MARKER: &str = "[Feedback]";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptMode {
    #[serde(rename = "ZS")]
    ZeroShot,
    #[serde(rename = "ICL")]
    InContext,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PromptError {
    #[error("in-context prompt needs at least one example")]
    MissingExamples,
}

/// What the previous failed attempt tells the next prompt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackState {
    pub wrong_label: DialectLabel,
    pub prev_output: String,
    /// Wrong label of the attempt before, set only when it differs from
    /// `wrong_label` (the oscillation case).
    pub oscillation_from: Option<DialectLabel>,
}

pub fn system_prompt(target: &DialectLabel) -> String {
    SYSTEM_TEMPLATE.replace("{DIALECT}", target.as_str())
}

pub fn feedback_block(target: &DialectLabel, feedback: &FeedbackState) -> String {
    let mut block = FEEDBACK_TEMPLATE
        .replace("{WRONG_LABEL}", feedback.wrong_label.as_str())
        .replace("{DIALECT}", target.as_str())
        .replace("{PREV_OUTPUT}", &feedback.prev_output);
    if let Some(last) = &feedback.oscillation_from {
        block.push_str(
            &OSCILLATION_TEMPLATE
                .replace("{last_wrong_label}", last.as_str())
                .replace("{wrong_label}", feedback.wrong_label.as_str())
                .replace("{dialect}", target.as_str()),
        );
    }
    block
}

/// Returns `(system, user)`. Feedback, when present, is prepended to the base
/// prompt and separated from it by a blank line.
pub fn build_prompt(
    mode: PromptMode,
    source: &str,
    target: &DialectLabel,
    examples: &[(String, String)],
    feedback: Option<&FeedbackState>,
) -> Result<(String, String), PromptError> {
    let mut user = String::new();
    if let Some(fb) = feedback {
        user.push_str(&feedback_block(target, fb));
        user.push('\n');
    }
    if mode == PromptMode::InContext {
        if examples.is_empty() {
            return Err(PromptError::MissingExamples);
        }
        for (standard, dialect) in examples {
            user.push_str(
                &EXAMPLE_TEMPLATE.replace("{STANDARD_EXAMPLE}", standard).replace("{DIALECT_EXAMPLE}", dialect),
            );
        }
    }
    user.push_str(&ZERO_SHOT_TEMPLATE.replace("{SOURCE}", source));
    Ok((system_prompt(target), user))
}

/// Stable hash of every template, for run metadata.
pub fn template_hash() -> u64 {
    [SYSTEM_TEMPLATE, ZERO_SHOT_TEMPLATE, EXAMPLE_TEMPLATE, FEEDBACK_TEMPLATE, OSCILLATION_TEMPLATE]
        .iter()
        .fold(seed::fnv1a64(b"templates"), |h, t| seed::fnv1a(h, t.as_bytes()))
}

/// Target dialect named in a system prompt.
pub fn parse_target(system: &str) -> Option<&str> {
    let rest = &system[system.find(SYSTEM_TARGET_PREFIX)? + SYSTEM_TARGET_PREFIX.len()..];
    Some(&rest[..rest.find(".\n").unwrap_or(rest.len())])
}

/// Source sentence of a user prompt (the last `Input sentence:` line).
pub fn parse_source(user: &str) -> Option<&str> {
    let rest = &user[user.rfind(SOURCE_PREFIX)? + SOURCE_PREFIX.len()..];
    Some(&rest[..rest.find('\n').unwrap_or(rest.len())])
}

pub fn has_examples(user: &str) -> bool {
    user.contains(EXAMPLE_MARKER)
}

pub fn has_feedback(user: &str) -> bool {
    user.contains(FEEDBACK_MARKER)
}
