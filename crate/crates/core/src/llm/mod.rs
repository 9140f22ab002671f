//! Chat-completion backends behind one interface.
//!
//! A [`Gateway`] wraps a [`ChatBackend`] with a content-addressed response
//! cache and an exact count of upstream calls. The same gateway type serves
//! both the acting model and the learning model; they are simply two
//! instances with their own configuration.

mod cache;
mod http;
mod scripted;

pub use cache::{request_digest, CacheEntry, ResponseCache};
pub use http::{HttpBackend, RetryPolicy};
pub use scripted::{Script, ScriptRule, ScriptedBackend};

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Sampling seed. Distinguishes the K samples drawn from one prompt, so
    /// they are separate requests (and cache entries) even at temperature 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, messages: Vec<Message>) -> Self {
        ChatRequest { model: model.into(), messages, temperature: 0.0, max_tokens: 1024, seed: None }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.messages.is_empty() {
            return Err(LlmError::InvalidRequest("a request needs at least one message".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::InvalidRequest(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        Ok(())
    }

    /// Content of the last user message, which is where prompts put the task.
    pub fn last_user(&self) -> &str {
        self.messages.iter().rev().find(|m| m.role == Role::User).map_or("", |m| m.content.as_str())
    }

    pub fn digest(&self) -> String {
        request_digest(self)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("upstream call failed after {attempts} attempt(s): {message}")]
    Upstream { attempts: u32, message: String },
    #[error("no cached response for request {digest}")]
    ReplayMiss { digest: String },
    #[error("scripted backend has no response left for: {prompt_head}")]
    ScriptExhausted { prompt_head: String },
    #[error("scripted response `{label}` does not match the request: {prompt_head}")]
    ScriptMismatch { label: String, prompt_head: String },
    #[error("response cache error at {}: {message}", path.display())]
    Cache { path: PathBuf, message: String },
    #[error("backend configuration: {0}")]
    Config(String),
}

/// Something that turns a chat request into completion text.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;
}

impl ChatBackend for Box<dyn ChatBackend> {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

impl<F> ChatBackend for F
where
    F: Fn(&ChatRequest) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        self(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Replay,
    Scripted,
}

/// How to reach a model. Credentials are never stored here, only the name
/// of the environment variable that holds them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub model: String,
    pub endpoint: Option<String>,
    pub api_key_env: Option<String>,
    pub cache_dir: Option<PathBuf>,
    /// Rule file for the scripted kind, see [`Script`].
    pub script: Option<PathBuf>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Replay,
            model: "gpt-4".into(),
            endpoint: None,
            api_key_env: None,
            cache_dir: None,
            script: None,
            temperature: 0.0,
            max_tokens: 1024,
            timeout_secs: 120,
            retry: RetryPolicy::default(),
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        match self.kind {
            BackendKind::Live if self.endpoint.is_none() => Err(LlmError::Config("a live backend needs an endpoint".into())),
            BackendKind::Live if self.api_key_env.is_none() => {
                Err(LlmError::Config("a live backend needs `api_key_env` naming the credential variable".into()))
            }
            BackendKind::Replay if self.cache_dir.is_none() => {
                Err(LlmError::Config("a replay backend needs a cache directory".into()))
            }
            BackendKind::Scripted if self.script.is_none() => {
                Err(LlmError::Config("a scripted backend needs a `script` file".into()))
            }
            _ if self.temperature < 0.0 => Err(LlmError::Config("temperature must be >= 0".into())),
            _ => Ok(()),
        }
    }

    /// A request for this backend's model and sampling settings.
    pub fn request(&self, messages: Vec<Message>) -> ChatRequest {
        ChatRequest { model: self.model.clone(), messages, temperature: self.temperature, max_tokens: self.max_tokens, seed: None }
    }
}

/// A backend plus caching and call accounting.
pub struct Gateway {
    backend: Option<Box<dyn ChatBackend>>,
    cache: Option<ResponseCache>,
    upstream_calls: AtomicU64,
    cache_hits: AtomicU64,
}

impl Gateway {
    /// Every call goes to `backend`; nothing is cached.
    pub fn uncached(backend: impl ChatBackend + 'static) -> Self {
        Gateway { backend: Some(Box::new(backend)), cache: None, upstream_calls: AtomicU64::new(0), cache_hits: AtomicU64::new(0) }
    }

    /// Calls `backend` only on cache misses and records every response.
    pub fn cached(backend: impl ChatBackend + 'static, cache: ResponseCache) -> Self {
        Gateway { cache: Some(cache), ..Gateway::uncached(backend) }
    }

    /// Answers from `cache` only; a miss is an error naming the digest.
    pub fn replay(cache: ResponseCache) -> Self {
        Gateway { backend: None, cache: Some(cache), upstream_calls: AtomicU64::new(0), cache_hits: AtomicU64::new(0) }
    }

    /// Builds a gateway from configuration. Live and scripted backends
    /// record into the cache directory when one is set.
    pub fn from_config(config: &BackendConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let cache = config.cache_dir.as_ref().map(ResponseCache::open).transpose()?;
        let with_cache = |backend: Box<dyn ChatBackend>| match cache.clone() {
            Some(cache) => Gateway { cache: Some(cache), ..Gateway::uncached(backend) },
            None => Gateway::uncached(backend),
        };
        match config.kind {
            BackendKind::Live => Ok(with_cache(Box::new(HttpBackend::from_config(config)?))),
            BackendKind::Scripted => {
                let script = Script::load(config.script.as_ref().expect("validated above"))?;
                Ok(with_cache(Box::new(script)))
            }
            BackendKind::Replay => Ok(Gateway::replay(cache.expect("validated above"))),
        }
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        request.validate()?;
        let digest = request.digest();
        if let Some(cache) = &self.cache {
            if let Some(entry) = cache.get(&digest)? {
                self.cache_hits.fetch_add(1, Ordering::Relaxed);
                return Ok(entry.response);
            }
        }
        let Some(backend) = &self.backend else {
            return Err(LlmError::ReplayMiss { digest });
        };
        self.upstream_calls.fetch_add(1, Ordering::SeqCst);
        let response = backend.complete(request)?;
        if let Some(cache) = &self.cache {
            cache.put(&CacheEntry::new(digest, request.clone(), response.clone()))?;
        }
        Ok(response)
    }

    /// Requests that reached the backend.
    pub fn upstream_calls(&self) -> u64 {
        self.upstream_calls.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::Relaxed)
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("cache", &self.cache)
            .field("replay_only", &self.backend.is_none())
            .field("upstream_calls", &self.upstream_calls())
            .finish()
    }
}
