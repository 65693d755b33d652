//! JSON-over-HTTP backend speaking the common completion/embedding API shape.
//!
//! Chat: `POST {base}/chat/completions` with
//! `{"model", "messages": [{"role":"system",..},{"role":"user",..}], "max_tokens", "temperature"}`;
//! reads `choices[0].message.content`, `choices[0].finish_reason` and `usage`.
//!
//! Embeddings: `POST {base}/embeddings` with `{"model", "input": [..]}`; reads
//! `data[*].embedding`, reordered by `data[*].index`.
//!
//! HTTP 408/429/5xx and connection failures are transient; other non-2xx
//! statuses fail immediately.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ChatProvider, ChatRequest, ChatResponse, EmbeddingProvider, ProviderError};

pub struct HttpProvider {
    base_url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatBody<'a> {
    model: &'a str,
    messages: [Message<'a>; 2],
    max_tokens: u32,
    temperature: f32,
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
    #[serde(default)]
    refusal: Option<String>,
}

#[derive(Deserialize, Default)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u32,
    #[serde(default)]
    completion_tokens: u32,
}

#[derive(Serialize)]
struct EmbedBody<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbedReply {
    data: Vec<EmbedItem>,
}

#[derive(Deserialize)]
struct EmbedItem {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f32>,
}

fn is_transient_status(status: u16) -> bool {
    status == 408 || status == 429 || (500..600).contains(&status)
}

impl HttpProvider {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { base_url: base_url.trim_end_matches('/').to_string(), api_key, agent }
    }

    fn post<B: Serialize, R: for<'de> Deserialize<'de>>(&self, path: &str, body: &B) -> Result<R, ProviderError> {
        let url = format!("{}/{}", self.base_url, path);
        let mut req = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| ProviderError::Transient {
            status: None,
            message: format!("{url}: {e}"),
        })?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            let message = format!("{url} returned HTTP {status}: {}", text.chars().take(500).collect::<String>());
            return Err(if is_transient_status(status) {
                ProviderError::Transient { status: Some(status), message }
            } else {
                ProviderError::Transport { attempts: 1, message }
            });
        }
        resp.body_mut()
            .read_json::<R>()
            .map_err(|e| ProviderError::Integrity(format!("{url}: malformed response body: {e}")))
    }
}

impl ChatProvider for HttpProvider {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let body = ChatBody {
            model: &request.model_tag,
            messages: [
                Message { role: "system", content: &request.system },
                Message { role: "user", content: &request.user },
            ],
            max_tokens: request.max_tokens,
            temperature: request.temperature,
        };
        let reply: ChatReply = self.post("chat/completions", &body)?;
        let choice = reply
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ProviderError::Integrity("completion has no choices".into()))?;
        let finish_reason = choice.finish_reason.unwrap_or_else(|| "unknown".into());
        if let Some(refusal) = choice.message.refusal.filter(|r| !r.is_empty()) {
            return Err(ProviderError::Content(refusal));
        }
        if finish_reason == "content_filter" {
            return Err(ProviderError::Content("completion blocked by content filter".into()));
        }
        let usage = reply.usage.unwrap_or_default();
        Ok(ChatResponse {
            text: choice.message.content.unwrap_or_default(),
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
            finish_reason,
        })
    }
}

impl EmbeddingProvider for HttpProvider {
    fn embed(&self, texts: &[String], model_tag: &str) -> Result<Vec<Vec<f32>>, ProviderError> {
        let reply: EmbedReply = self.post("embeddings", &EmbedBody { model: model_tag, input: texts })?;
        let mut items = reply.data;
        if items.iter().all(|i| i.index.is_some()) {
            items.sort_by_key(|i| i.index);
        }
        Ok(items.into_iter().map(|i| i.embedding).collect())
    }
}
