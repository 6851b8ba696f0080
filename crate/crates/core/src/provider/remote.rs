//! Chat-completions over HTTP.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::warn;

use super::chat::{ChatProvider, ChatRequest};
use super::ProviderError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    pub model: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

fn default_timeout() -> u64 {
    60
}

fn default_attempts() -> u32 {
    3
}

fn default_backoff() -> u64 {
    250
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key_env: None,
            model: model.into(),
            timeout_secs: default_timeout(),
            max_attempts: default_attempts(),
            backoff_ms: default_backoff(),
        }
    }
}

pub struct RemoteProvider {
    config: RemoteConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteProvider {
    pub fn new(config: RemoteConfig) -> Result<Self, ProviderError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ProviderError::Config(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs.max(1)))
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(Self { config, api_key, client })
    }

    /// Request body in the common chat-completions shape. Attachments become
    /// `image_url` content parts carrying data URIs.
    pub fn request_body(&self, request: &ChatRequest) -> Value {
        build_body(&self.config.model, request)
    }

    fn attempt(&self, body: &Value) -> Result<String, AttemptError> {
        let mut builder = self.client.post(&self.config.endpoint).json(body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| AttemptError::Retry(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(AttemptError::Retry(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(AttemptError::Fatal(ProviderError::RemoteRejected(status.as_u16())));
        }
        let value: Value = response.json().map_err(|e| AttemptError::Retry(e.to_string()))?;
        parse_reply(&value).map_err(AttemptError::Fatal)
    }
}

enum AttemptError {
    Retry(String),
    Fatal(ProviderError),
}

pub(crate) fn build_body(model: &str, request: &ChatRequest) -> Value {
    let messages: Vec<Value> = request
        .messages
        .iter()
        .map(|m| {
            if m.attachments.is_empty() {
                json!({ "role": m.role.as_str(), "content": m.text })
            } else {
                let mut parts = vec![json!({ "type": "text", "text": m.text })];
                for a in &m.attachments {
                    let uri = format!("data:{};base64,{}", a.media_type, STANDARD.encode(&a.bytes));
                    parts.push(json!({ "type": "image_url", "image_url": { "url": uri } }));
                }
                json!({ "role": m.role.as_str(), "content": parts })
            }
        })
        .collect();
    json!({
        "model": model,
        "messages": messages,
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    })
}

pub(crate) fn parse_reply(value: &Value) -> Result<String, ProviderError> {
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| ProviderError::MalformedReply("missing choices[0].message.content".into()))
}

impl ChatProvider for RemoteProvider {
    fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        request.validate()?;
        let body = self.request_body(request);
        let attempts = self.config.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.config.backoff_ms.saturating_mul(1 << (attempt - 1));
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(AttemptError::Fatal(e)) => return Err(e),
                Err(AttemptError::Retry(msg)) => {
                    warn!(attempt = attempt + 1, error = %msg, "remote chat attempt failed");
                    last = msg;
                }
            }
        }
        Err(ProviderError::RemoteUnavailable { attempts, last_error: last })
    }
}
