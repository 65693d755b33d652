use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::retry::Reliability;
use super::ProviderError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    pub model_tag: String,
    pub max_tokens: u32,
    pub temperature: f32,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.system.trim().is_empty() {
            return Err(ProviderError::Validation("system prompt is empty".into()));
        }
        if self.user.trim().is_empty() {
            return Err(ProviderError::Validation("user prompt is empty".into()));
        }
        if self.model_tag.trim().is_empty() {
            return Err(ProviderError::Validation("model tag is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
    pub finish_reason: String,
}

pub trait ChatProvider: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError>;
}

/// Validating chat client with retry, rate limiting and bounded concurrency.
pub struct ChatClient {
    backend: Arc<dyn ChatProvider>,
    reliability: Reliability,
}

impl ChatClient {
    pub fn new(backend: Arc<dyn ChatProvider>, reliability: Reliability) -> Self {
        Self { backend, reliability }
    }
}

impl ChatProvider for ChatClient {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        request.validate()?;
        let response = self.reliability.run(|| self.backend.chat(request))?;
        if response.text.trim().is_empty() {
            return Err(ProviderError::Content(format!(
                "empty completion (finish reason: {})",
                response.finish_reason
            )));
        }
        Ok(response)
    }
}
