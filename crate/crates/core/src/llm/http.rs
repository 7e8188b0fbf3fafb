use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, BackendError, GenerationRequest};

/// Chat-completion endpoint settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Full URL of the completions endpoint.
    pub endpoint: String,
    pub model: String,
    pub timeout_ms: u64,
    pub max_inflight: usize,
    /// Environment variable holding the bearer token; unset means no auth.
    pub api_key_env: String,
    /// Whether to forward the per-request seed.
    pub send_seed: bool,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "default".into(),
            timeout_ms: 60_000,
            max_inflight: 4,
            api_key_env: "DIALECT_REFINE_API_KEY".into(),
            send_seed: true,
        }
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Ok(Self { config, api_key, client })
    }

    pub fn request_body(&self, req: &GenerationRequest) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": req.user},
            ],
            "n": req.n,
            "temperature": req.temperature,
        });
        if self.config.send_seed {
            body["seed"] = json!(req.seed);
        }
        body
    }
}

/// Extracts `choices[*].message.content`.
pub fn parse_choices(body: &str) -> Result<Vec<String>, BackendError> {
    let value: Value = serde_json::from_str(body).map_err(|e| BackendError::Malformed(e.to_string()))?;
    let choices = value
        .get("choices")
        .and_then(Value::as_array)
        .ok_or_else(|| BackendError::Malformed("missing choices array".into()))?;
    choices
        .iter()
        .map(|c| {
            c.pointer("/message/content")
                .and_then(Value::as_str)
                .map(|s| s.trim().to_owned())
                .ok_or_else(|| BackendError::Malformed("choice without message.content".into()))
        })
        .collect()
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        &self.config.model
    }

    fn generate(&self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        req.validate()?;
        let mut call = self.client.post(&self.config.endpoint).json(&self.request_body(req));
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let status = response.status();
        let body = response.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Status { status: status.as_u16(), body });
        }
        let mut out = parse_choices(&body)?;
        if out.len() < req.n {
            return Err(BackendError::Malformed(format!("expected {} choices, got {}", req.n, out.len())));
        }
        out.truncate(req.n);
        Ok(out)
    }
}
