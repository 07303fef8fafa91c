use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    /// Empty for no system message.
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub content: String,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BackendError {
    /// Worth retrying: network trouble, server errors.
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("rate limited: {message}")]
    RateLimited {
        message: String,
        retry_after: Option<Duration>,
    },
    #[error("authentication failed: {0}")]
    Auth(String),
    /// The provider refused the prompt or the completion.
    #[error("content filter: {0}")]
    ContentFilter(String),
    #[error("request rejected: {0}")]
    Permanent(String),
}

/// A chat-completion service.
pub trait ChatBackend: Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;

    /// Whether the service honours `seed`.
    fn supports_seed(&self) -> bool {
        true
    }
}

/// Where and how to reach an OpenAI-compatible endpoint. Holds the name of the
/// environment variable with the key, never the key itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub api_key_env: String,
    pub supports_seed: bool,
    pub timeout_secs: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            supports_seed: true,
            timeout_secs: 120,
        }
    }
}

#[derive(Debug, Error)]
pub enum EndpointError {
    #[error("environment variable {0} with the API key is not set")]
    MissingCredential(String),
    #[error("cannot create HTTP client: {0}")]
    Client(String),
}

/// Blocking client for `POST {base_url}/chat/completions`.
pub struct HttpBackend {
    config: EndpointConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpBackend")
            .field("config", &self.config)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

impl HttpBackend {
    pub fn new(config: EndpointConfig) -> Result<Self, EndpointError> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| EndpointError::MissingCredential(config.api_key_env.clone()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| EndpointError::Client(e.to_string()))?;
        Ok(HttpBackend {
            config,
            api_key,
            client,
        })
    }

    fn body(&self, request: &ChatRequest) -> Value {
        let mut messages = Vec::new();
        if !request.system.is_empty() {
            messages.push(json!({"role": "system", "content": request.system}));
        }
        messages.push(json!({"role": "user", "content": request.user}));
        let mut body = json!({
            "model": request.model,
            "messages": messages,
            "temperature": request.temperature,
        });
        if let (Some(seed), true) = (request.seed, self.config.supports_seed) {
            body["seed"] = json!(seed);
        }
        body
    }
}

fn is_content_filter(body: &Value) -> bool {
    let err = &body["error"];
    err["code"] == "content_filter" || err["type"] == "content_filter"
}

fn error_message(status: reqwest::StatusCode, body: &Value) -> String {
    body["error"]["message"]
        .as_str()
        .map(|m| format!("HTTP {status}: {m}"))
        .unwrap_or_else(|| format!("HTTP {status}"))
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = self.body(request);
        log::debug!("POST {url} (authorization redacted) {body}");
        let response = self
            .client
            .post(&url)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| BackendError::Transient(e.without_url().to_string()))?;
        let status = response.status();
        let retry_after = response
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = response
            .text()
            .map_err(|e| BackendError::Transient(e.without_url().to_string()))?;
        log::debug!("HTTP {status} {text}");
        let parsed: Value = serde_json::from_str(&text).unwrap_or(Value::Null);

        if !status.is_success() {
            let message = error_message(status, &parsed);
            return Err(match status.as_u16() {
                401 | 403 => BackendError::Auth(message),
                429 => BackendError::RateLimited {
                    message,
                    retry_after,
                },
                408 | 409 => BackendError::Transient(message),
                s if s >= 500 => BackendError::Transient(message),
                _ if is_content_filter(&parsed) => BackendError::ContentFilter(message),
                _ => BackendError::Permanent(message),
            });
        }
        let choice = &parsed["choices"][0];
        if choice["finish_reason"] == "content_filter" {
            return Err(BackendError::ContentFilter("completion withheld".into()));
        }
        match choice["message"]["content"].as_str() {
            Some(content) => Ok(ChatResponse {
                content: content.to_string(),
            }),
            None => Err(BackendError::Transient("response has no message content".into())),
        }
    }

    fn supports_seed(&self) -> bool {
        self.config.supports_seed
    }
}
