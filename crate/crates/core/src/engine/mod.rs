//! The verify / feedback / retry loop around a generation backend.

pub mod prompt;
mod refine;

pub use prompt::{build_prompt, FeedbackState, PromptError, PromptMode};
pub use refine::{
    hard_subset, request_seed, run_method, select_best, summarize, Attempt, EngineError, ExampleRetriever,
    MethodConfig, RefineMode, RefineTrace, Refiner, RunOptions,
};
