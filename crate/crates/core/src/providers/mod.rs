//! Provider-agnostic embedding and chat-completion clients.
//!
//! Backends implement [`EmbeddingProvider`] / [`ChatProvider`]; the [`Embedder`]
//! and [`ChatClient`] wrappers add validation, normalization, caching, retries,
//! rate limiting and bounded concurrency on top.

pub mod cache;
mod chat;
mod embed;
pub mod http;
pub mod mock;
pub mod retry;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use cache::{CacheKey, DiskCache, MemoryCache, VectorCache};
pub use chat::{ChatClient, ChatProvider, ChatRequest, ChatResponse};
pub use embed::{normalize, Embedder, EmbeddingProfile, EmbeddingProvider, EmbeddingVector, Purpose, UNIT_NORM_TOLERANCE};
pub use retry::{Clock, ManualClock, Reliability, RetryPolicy, SystemClock};

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("invalid request: {0}")]
    Validation(String),
    /// Retryable failure (HTTP 429/5xx, connection reset, timeout).
    #[error("transient provider failure{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Transient { status: Option<u16>, message: String },
    #[error("provider transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider refused the request: {0}")]
    Content(String),
    #[error("provider integrity error: {0}")]
    Integrity(String),
    #[error("embedding cache error: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    /// JSON-over-HTTP completion / embedding endpoints.
    Http,
    /// Chat: response text is the user prompt.
    MockEcho,
    /// Chat: canned extractive reports and cited section bodies.
    MockTemplate,
    /// Embedding: SHA-256 seeded pseudo-random unit vectors.
    MockHash,
    /// Embedding: signed feature hashing of lowercase word tokens.
    MockBow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatBackendConfig {
    pub kind: BackendKind,
    pub model: String,
    pub max_tokens: u32,
    pub temperature: f32,
}

impl Default for ChatBackendConfig {
    fn default() -> Self {
        Self { kind: BackendKind::Http, model: "gpt-4o".into(), max_tokens: 16_000, temperature: 0.7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingBackendConfig {
    pub kind: BackendKind,
    pub linking: EmbeddingProfile,
    pub heading_eval: EmbeddingProfile,
}

impl Default for EmbeddingBackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Http,
            linking: EmbeddingProfile::new(Purpose::Linking, "bge-m3", 1024),
            heading_eval: EmbeddingProfile::new(Purpose::HeadingEval, "bge-large-en-v1.5", 1024),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProvidersConfig {
    pub base_url: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub max_concurrency: usize,
    pub max_retries: u32,
    /// Requests per second leaving each client; 0 disables limiting.
    pub rps: f64,
    pub timeout_secs: u64,
    pub retry_base_ms: u64,
    pub max_batch: usize,
    /// Embedding cache directory; in-memory when unset.
    pub cache_dir: Option<PathBuf>,
    pub chat: ChatBackendConfig,
    pub embedding: EmbeddingBackendConfig,
}

impl Default for ProvidersConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            api_key_env: "COAUTHOR_API_KEY".into(),
            max_concurrency: 4,
            max_retries: 3,
            rps: 2.0,
            timeout_secs: 600,
            retry_base_ms: 500,
            max_batch: 64,
            cache_dir: None,
            chat: ChatBackendConfig::default(),
            embedding: EmbeddingBackendConfig::default(),
        }
    }
}

impl ProvidersConfig {
    fn reliability(&self) -> Reliability {
        let policy = RetryPolicy {
            max_retries: self.max_retries,
            base_delay: Duration::from_millis(self.retry_base_ms),
            ..RetryPolicy::default()
        };
        Reliability::new(policy, self.rps, self.max_concurrency, Arc::new(SystemClock::default()))
    }

    fn http(&self) -> http::HttpProvider {
        let key = std::env::var(&self.api_key_env).ok().filter(|k| !k.is_empty());
        http::HttpProvider::new(&self.base_url, key, Duration::from_secs(self.timeout_secs))
    }

    /// Builds the configured chat client.
    pub fn chat_client(&self) -> Result<ChatClient, ProviderError> {
        let backend: Arc<dyn ChatProvider> = match self.chat.kind {
            BackendKind::Http => Arc::new(self.http()),
            BackendKind::MockEcho => Arc::new(mock::MockChat::echo()),
            BackendKind::MockTemplate => Arc::new(mock::MockChat::template()),
            other => {
                return Err(ProviderError::Validation(format!("{other:?} is not a chat backend")));
            }
        };
        Ok(ChatClient::new(backend, self.reliability()))
    }

    /// Builds the configured embedder.
    pub fn embedder(&self) -> Result<Embedder, ProviderError> {
        let backend: Arc<dyn EmbeddingProvider> = match self.embedding.kind {
            BackendKind::Http => Arc::new(self.http()),
            BackendKind::MockHash => Arc::new(mock::HashEmbedder::for_models(self.profile_dims())),
            BackendKind::MockBow => Arc::new(mock::BowEmbedder::for_models(self.profile_dims())),
            other => {
                return Err(ProviderError::Validation(format!("{other:?} is not an embedding backend")));
            }
        };
        let cache: Arc<dyn VectorCache> = match &self.cache_dir {
            Some(dir) => Arc::new(DiskCache::new(dir)),
            None => Arc::new(MemoryCache::default()),
        };
        Ok(Embedder::new(backend, cache, self.reliability(), self.max_batch))
    }

    fn profile_dims(&self) -> Vec<(String, usize)> {
        let e = &self.embedding;
        vec![
            (e.linking.model_tag.clone(), e.linking.dim),
            (e.heading_eval.model_tag.clone(), e.heading_eval.dim),
        ]
    }
}
