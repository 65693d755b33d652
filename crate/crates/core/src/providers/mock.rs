//! Deterministic offline backends for tests and dry runs.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use sha2::{Digest, Sha256};

use super::{ChatProvider, ChatRequest, ChatResponse, EmbeddingProvider, ProviderError};
use crate::ingest::Segmenter;
use crate::prompts::{self, HEADINGS_MARKER, HEADING_PATH_SEPARATOR, INTERMEDIATE_HEADING, PAPER_MARKER, REFERENCES_MARKER};

/// Sentences kept by the template backend's extractive "report".
const TEMPLATE_REPORT_SENTENCES: usize = 8;

/// Pseudo-random vector seeded by `SHA-256(model_tag || 0x00 || text)`.
///
/// A ChaCha8 stream seeded with the digest yields one `u32` per dimension,
/// mapped to `u / 2^32 * 2 - 1` in `[-1, 1)`. Not normalized.
pub fn hash_vector(model_tag: &str, text: &str, dim: usize) -> Vec<f32> {
    let mut h = Sha256::new();
    h.update(model_tag.as_bytes());
    h.update([0u8]);
    h.update(text.as_bytes());
    let seed: [u8; 32] = h.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(seed);
    (0..dim)
        .map(|_| (f64::from(rng.next_u32()) / 4_294_967_296.0 * 2.0 - 1.0) as f32)
        .collect()
}

#[derive(Debug, Clone)]
struct Dims {
    by_model: HashMap<String, usize>,
    default: usize,
}

impl Dims {
    fn get(&self, model_tag: &str) -> usize {
        self.by_model.get(model_tag).copied().unwrap_or(self.default)
    }

    fn from_models(models: Vec<(String, usize)>) -> Self {
        let default = models.first().map_or(64, |m| m.1);
        Self { by_model: models.into_iter().collect(), default }
    }
}

/// Maps each text to a fixed pseudo-random direction; unrelated texts are
/// nearly orthogonal in high dimension, identical texts are identical.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dims: Dims,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { dims: Dims { by_model: HashMap::new(), default: dim } }
    }

    pub fn for_models(models: Vec<(String, usize)>) -> Self {
        Self { dims: Dims::from_models(models) }
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn embed(&self, texts: &[String], model_tag: &str) -> Result<Vec<Vec<f32>>, ProviderError> {
        let dim = self.dims.get(model_tag);
        Ok(texts.iter().map(|t| hash_vector(model_tag, t, dim)).collect())
    }
}

/// Signed feature hashing of lowercase alphanumeric tokens, so texts sharing
/// words have proportionally similar vectors. Gives the mock pipeline a
/// crude notion of semantic overlap.
#[derive(Debug, Clone)]
pub struct BowEmbedder {
    dims: Dims,
}

impl BowEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { dims: Dims { by_model: HashMap::new(), default: dim } }
    }

    pub fn for_models(models: Vec<(String, usize)>) -> Self {
        Self { dims: Dims::from_models(models) }
    }

    pub fn vector(text: &str, model_tag: &str, dim: usize) -> Vec<f32> {
        let mut v = vec![0f32; dim];
        let lower = text.to_lowercase();
        let mut any = false;
        for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            let digest = Sha256::digest(token.as_bytes());
            let h = u64::from_le_bytes(digest[..8].try_into().unwrap());
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[(h % dim as u64) as usize] += sign;
            any = true;
        }
        if !any || v.iter().all(|&x| x == 0.0) {
            return hash_vector(model_tag, text, dim);
        }
        v
    }
}

impl EmbeddingProvider for BowEmbedder {
    fn embed(&self, texts: &[String], model_tag: &str) -> Result<Vec<Vec<f32>>, ProviderError> {
        let dim = self.dims.get(model_tag);
        Ok(texts.iter().map(|t| Self::vector(t, model_tag, dim)).collect())
    }
}

/// Wraps an embedding backend and counts traffic.
pub struct CountingEmbedder<E> {
    inner: E,
    calls: AtomicUsize,
    texts: AtomicUsize,
}

impl<E> CountingEmbedder<E> {
    pub fn new(inner: E) -> Self {
        Self { inner, calls: AtomicUsize::new(0), texts: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn texts_seen(&self) -> usize {
        self.texts.load(Ordering::SeqCst)
    }
}

impl<E: EmbeddingProvider> EmbeddingProvider for CountingEmbedder<E> {
    fn embed(&self, texts: &[String], model_tag: &str) -> Result<Vec<Vec<f32>>, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.texts.fetch_add(texts.len(), Ordering::SeqCst);
        self.inner.embed(texts, model_tag)
    }
}

pub type Script = Arc<dyn Fn(&ChatRequest, usize) -> Result<String, ProviderError> + Send + Sync>;

#[derive(Clone)]
pub enum MockMode {
    /// Response text is the user prompt.
    Echo,
    /// Always the same text.
    Fixed(String),
    /// Extractive reports for compression prompts, cited section bodies for
    /// generation prompts, concatenation for merge prompts.
    Template,
    /// Every call is refused.
    Refuse,
    /// Arbitrary function of the request and the 0-based call number.
    Script(Script),
}

/// Instrumented chat backend.
pub struct MockChat {
    mode: MockMode,
    fail_first: AtomicU32,
    fail_status: u16,
    delay: Duration,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
    log: Mutex<Vec<ChatRequest>>,
}

impl MockChat {
    pub fn new(mode: MockMode) -> Self {
        Self {
            mode,
            fail_first: AtomicU32::new(0),
            fail_status: 500,
            delay: Duration::ZERO,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn echo() -> Self {
        Self::new(MockMode::Echo)
    }

    pub fn fixed(text: impl Into<String>) -> Self {
        Self::new(MockMode::Fixed(text.into()))
    }

    pub fn template() -> Self {
        Self::new(MockMode::Template)
    }

    pub fn refusing() -> Self {
        Self::new(MockMode::Refuse)
    }

    pub fn scripted(f: impl Fn(&ChatRequest, usize) -> Result<String, ProviderError> + Send + Sync + 'static) -> Self {
        Self::new(MockMode::Script(Arc::new(f)))
    }

    /// The first `n` calls fail with a transient HTTP `status`.
    pub fn failing_first(mut self, n: u32, status: u16) -> Self {
        self.fail_first = AtomicU32::new(n);
        self.fail_status = status;
        self
    }

    /// Each call sleeps for `d` while counted as in flight.
    pub fn with_delay(mut self, d: Duration) -> Self {
        self.delay = d;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.log.lock().unwrap().clone()
    }

    fn respond(&self, request: &ChatRequest, call_no: usize) -> Result<String, ProviderError> {
        match &self.mode {
            MockMode::Echo => Ok(request.user.clone()),
            MockMode::Fixed(text) => Ok(text.clone()),
            MockMode::Template => Ok(template_reply(&request.user)),
            MockMode::Refuse => Err(ProviderError::Content("mock refusal".into())),
            MockMode::Script(f) => f(request, call_no),
        }
    }
}

impl ChatProvider for MockChat {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let call_no = self.calls.fetch_add(1, Ordering::SeqCst);
        self.log.lock().unwrap().push(request.clone());

        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        let failing = self
            .fail_first
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok();
        let result = if failing {
            Err(ProviderError::Transient { status: Some(self.fail_status), message: "injected failure".into() })
        } else {
            self.respond(request, call_no)
        };
        self.in_flight.fetch_sub(1, Ordering::SeqCst);

        let text = result?;
        Ok(ChatResponse {
            prompt_tokens: (request.system.len() + request.user.len()).div_ceil(4) as u32,
            completion_tokens: text.len().div_ceil(4) as u32,
            text,
            finish_reason: "stop".into(),
        })
    }
}

fn entry_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(\d+)\. (.*?) -- (.*)$").unwrap())
}

fn citation_mark() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\s*\[\d+(?:\s*,\s*\d+)*\]").unwrap())
}

/// Reply of [`MockMode::Template`] for a rendered user prompt.
pub fn template_reply(user: &str) -> String {
    let segmenter = Segmenter::default();
    if let Some(refs) = prompts::section(user, REFERENCES_MARKER) {
        if refs.contains(INTERMEDIATE_HEADING) {
            return merge_reply(refs);
        }
        let heading = prompts::section(user, HEADINGS_MARKER)
            .and_then(|h| h.lines().last())
            .map(|h| h.rsplit(HEADING_PATH_SEPARATOR).next().unwrap_or(h).trim().to_string())
            .filter(|h| !h.is_empty())
            .unwrap_or_else(|| "this section".into());
        let mut out = vec![format!("This section addresses {heading}.")];
        for (idx, report) in reference_entries(refs) {
            if let Some(s) = first_prose_sentence(&segmenter, &report) {
                out.push(cite(&s, idx));
            }
        }
        return out.join(" ");
    }
    if let Some(doc) = prompts::section(user, PAPER_MARKER) {
        let sentences: Vec<&str> = segmenter
            .sentences(doc)
            .into_iter()
            .filter(|s| !s.starts_with('#'))
            .take(TEMPLATE_REPORT_SENTENCES)
            .collect();
        if !sentences.is_empty() {
            return sentences.join(" ");
        }
    }
    user.to_string()
}

fn reference_entries(refs: &str) -> Vec<(u32, String)> {
    let mut entries: Vec<(u32, String)> = Vec::new();
    for line in refs.lines() {
        if let Some(c) = entry_line().captures(line) {
            entries.push((c[1].parse().unwrap_or(0), c[3].to_string()));
        } else if let Some(last) = entries.last_mut() {
            last.1.push('\n');
            last.1.push_str(line);
        }
    }
    entries
}

fn first_prose_sentence(segmenter: &Segmenter, text: &str) -> Option<String> {
    segmenter
        .sentences(text)
        .into_iter()
        .find(|s| !s.starts_with('#'))
        .map(|s| citation_mark().replace_all(s, "").trim().to_string())
        .filter(|s| !s.is_empty())
}

fn cite(sentence: &str, idx: u32) -> String {
    match sentence.char_indices().last() {
        Some((i, c)) if matches!(c, '.' | '!' | '?') => format!("{} [{idx}]{c}", &sentence[..i]),
        _ => format!("{sentence} [{idx}]."),
    }
}

fn merge_reply(refs: &str) -> String {
    let mut parts: Vec<String> = Vec::new();
    for line in refs.lines() {
        if line.starts_with(INTERMEDIATE_HEADING) {
            parts.push(String::new());
        } else if let Some(p) = parts.last_mut() {
            if !p.is_empty() {
                p.push('\n');
            }
            p.push_str(line);
        }
    }
    parts.iter().map(|p| p.trim()).filter(|p| !p.is_empty()).collect::<Vec<_>>().join("\n\n")
}
