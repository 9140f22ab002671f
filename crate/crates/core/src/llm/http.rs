use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendConfig, ChatBackend, ChatRequest, LlmError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, initial_backoff_ms: 1000, multiplier: 2.0 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = self.multiplier.max(1.0).powi(attempt.saturating_sub(1) as i32);
        Duration::from_millis((self.initial_backoff_ms as f64 * factor) as u64)
    }
}

/// A chat-completions endpoint over HTTP.
pub struct HttpBackend {
    endpoint: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, retry: RetryPolicy, timeout: Duration) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(HttpBackend { endpoint: endpoint.into(), api_key, retry, client })
    }

    /// Reads the credential from the variable named in the config.
    pub fn from_config(config: &BackendConfig) -> Result<Self, LlmError> {
        let endpoint = config.endpoint.clone().ok_or_else(|| LlmError::Config("missing endpoint".into()))?;
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| LlmError::Config(format!("environment variable {var} is not set")))?),
            None => None,
        };
        HttpBackend::new(endpoint, api_key, config.retry, Duration::from_secs(config.timeout_secs))
    }

    fn attempt(&self, request: &ChatRequest) -> Result<String, String> {
        let mut builder = self.client.post(&self.endpoint).json(request);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| e.to_string())?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(format!("HTTP {status}: {}", body.chars().take(200).collect::<String>()));
        }
        let wire: WireResponse = response.json().map_err(|e| format!("unexpected response body: {e}"))?;
        wire.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| "response has no message content".to_string())
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let attempts = self.retry.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.attempt(request) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    log::warn!("chat request attempt {attempt}/{attempts} failed: {e}");
                    last = e;
                    if attempt < attempts {
                        std::thread::sleep(self.retry.backoff(attempt));
                    }
                }
            }
        }
        Err(LlmError::Upstream { attempts, message: last })
    }
}
