//! Generation backends.
//!
//! [`ScriptedBackend`] simulates a translator with rule-defined dialects and
//! is fully deterministic; [`HttpBackend`] talks to a chat-completion server.

mod http;
mod scripted;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use http::{HttpBackend, HttpConfig};
pub use scripted::{ScriptedBackend, ScriptedPersona};

/// One prompt sent to a backend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub system: String,
    pub user: String,
    /// Number of independent completions.
    pub n: usize,
    pub temperature: f64,
    pub seed: u64,
    /// 1-based refinement attempt this request belongs to.
    pub attempt: usize,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.n == 0 {
            return Err(BackendError::InvalidRequest("n must be at least 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(BackendError::InvalidRequest(format!("invalid temperature {}", self.temperature)));
        }
        if self.attempt == 0 {
            return Err(BackendError::InvalidRequest("attempt is 1-based".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("server returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl BackendError {
    /// Whether retrying the same request may succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::Transport(_) | BackendError::Timeout => true,
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            BackendError::InvalidRequest(_) | BackendError::Malformed(_) => false,
        }
    }
}

pub trait Backend: Send + Sync {
    /// Short identifier used as the model column of reports.
    fn name(&self) -> &str;

    /// Returns exactly `req.n` completions.
    fn generate(&self, req: &GenerationRequest) -> Result<Vec<String>, BackendError>;
}

/// Transport-level retries; independent of refinement attempts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: usize,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 2, base_delay_ms: 500 }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self { max_retries: 0, base_delay_ms: 0 }
    }

    /// Exponential backoff before retry `i` (0-based).
    pub fn delay(&self, i: usize) -> Duration {
        Duration::from_millis(self.base_delay_ms.saturating_mul(1 << i.min(16)))
    }
}

/// Calls the backend, retrying transient failures up to the policy limit.
pub fn generate_with_retry(
    backend: &dyn Backend,
    req: &GenerationRequest,
    policy: &RetryPolicy,
) -> Result<Vec<String>, BackendError> {
    req.validate()?;
    let mut retry = 0;
    loop {
        match backend.generate(req) {
            Ok(out) if out.len() == req.n => return Ok(out),
            Ok(out) => {
                return Err(BackendError::Malformed(format!("expected {} completions, got {}", req.n, out.len())))
            }
            Err(e) if e.is_transient() && retry < policy.max_retries => {
                std::thread::sleep(policy.delay(retry));
                retry += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Backend selection as written in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Scripted(ScriptedPersona),
    Http(HttpConfig),
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec::Scripted(ScriptedPersona::responsive())
    }
}

impl BackendSpec {
    pub fn build(&self) -> Result<Box<dyn Backend>, BackendError> {
        Ok(match self {
            BackendSpec::Scripted(p) => Box::new(ScriptedBackend::new(p.clone())?),
            BackendSpec::Http(c) => Box::new(HttpBackend::new(c.clone())?),
        })
    }

    pub fn max_inflight(&self) -> usize {
        match self {
            BackendSpec::Scripted(_) => 0,
            BackendSpec::Http(c) => c.max_inflight,
        }
    }
}
