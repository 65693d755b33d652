//! Per-document compression into research reports.
//!
//! A document whose full request fits the context budget is compressed in one
//! call. Longer documents are cut at sentence boundaries into parts of at most
//! `part_fraction × budget` tokens; each part is compressed, and the
//! concatenated part reports are compressed again (recursively, if they are
//! still too long).

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::ingest::{DocId, ReferenceDoc, Segmenter};
use crate::metrics::sha256_hex;
use crate::prompts::{self, PromptTemplate};
use crate::providers::cache::write_atomic;
use crate::providers::{ChatBackendConfig, ChatProvider, ChatRequest, ProviderError};

/// Characters per token assumed by [`estimate_tokens`].
pub const CHARS_PER_TOKEN: f64 = 4.0;
/// Safety margin applied on top of the character estimate.
pub const TOKEN_SAFETY_MARGIN: f64 = 1.1;
const MAX_MERGE_DEPTH: usize = 8;

/// `ceil(chars / 4 × 1.1)`.
pub fn estimate_tokens(text: &str) -> usize {
    // 1.1 / 4 = 11 / 40, kept in integers so exact multiples do not round up.
    (text.chars().count() * 11).div_ceil(40)
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, thiserror::Error)]
pub enum CompressorError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("document {doc_id} (idx {idx}): {source}")]
    Provider {
        doc_id: DocId,
        idx: u32,
        #[source]
        source: ProviderError,
    },
    #[error("context budget: {0}")]
    Budget(String),
    #[error("all {0} documents failed to compress")]
    BatchFailed(usize),
    #[error("report cache {path}: {source}")]
    Cache { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompressorConfig {
    pub target_words: usize,
    /// Maximum estimated prompt tokens of any single request.
    pub context_budget_tokens: usize,
    /// Part size as a fraction of the budget when splitting.
    pub part_fraction: f64,
    /// Documents compressed concurrently by [`Compressor::compress_corpus`].
    pub max_concurrency: usize,
    /// Directory for cached responses; in-memory when unset.
    pub cache_dir: Option<PathBuf>,
}

impl Default for CompressorConfig {
    fn default() -> Self {
        Self {
            target_words: 4000,
            context_budget_tokens: 120_000,
            part_fraction: 0.6,
            max_concurrency: 4,
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    SinglePass,
    Merged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedReport {
    pub doc_id: DocId,
    pub idx: u32,
    pub title: String,
    pub report_markdown: String,
    pub word_count: usize,
    pub stage: Stage,
    /// Parts the body was split into at the first level (1 for single pass).
    pub parts: usize,
    /// Provider requests issued, cache hits included.
    pub requests: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocFailure {
    pub doc_id: DocId,
    pub idx: u32,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusOutcome {
    /// Successful reports, sorted by idx.
    pub reports: Vec<CompressedReport>,
    pub failures: Vec<DocFailure>,
}

/// Response cache keyed by the full rendered request.
#[derive(Debug, Default)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, String>>,
}

impl ResponseCache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir, memory: Mutex::default() }
    }

    pub fn key(req: &ChatRequest) -> String {
        sha256_hex(&format!(
            "{}\0{}\0{}\0{}\0{}",
            req.model_tag, req.max_tokens, req.temperature, req.system, req.user
        ))
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(&key[..2]).join(format!("{key}.txt")))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        if let Some(hit) = self.memory.lock().unwrap().get(key) {
            return Some(hit.clone());
        }
        let text = std::fs::read_to_string(self.path(key)?).ok().filter(|t| !t.trim().is_empty())?;
        self.memory.lock().unwrap().insert(key.to_string(), text.clone());
        Some(text)
    }

    pub fn put(&self, key: &str, text: &str) -> Result<(), CompressorError> {
        if let Some(path) = self.path(key) {
            write_atomic(&path, text.as_bytes()).map_err(|source| CompressorError::Cache { path, source })?;
        }
        self.memory.lock().unwrap().insert(key.to_string(), text.to_string());
        Ok(())
    }
}

pub struct Compressor {
    chat: Arc<dyn ChatProvider>,
    settings: ChatBackendConfig,
    prompt: PromptTemplate,
    config: CompressorConfig,
    segmenter: Segmenter,
    cache: ResponseCache,
}

struct Outcome {
    text: String,
    stage: Stage,
    parts: usize,
}

impl Compressor {
    pub fn new(
        chat: Arc<dyn ChatProvider>,
        settings: ChatBackendConfig,
        prompt: PromptTemplate,
        config: CompressorConfig,
        segmenter: Segmenter,
    ) -> Self {
        let cache = ResponseCache::new(config.cache_dir.clone());
        Self { chat, settings, prompt, config, segmenter, cache }
    }

    pub fn config(&self) -> &CompressorConfig {
        &self.config
    }

    pub fn render(&self, body: &str) -> ChatRequest {
        let vars = HashMap::from([
            ("target_words", prompts::with_thousands(self.config.target_words)),
            ("document", body.to_string()),
        ]);
        let (system, user) = self.prompt.render(&vars);
        ChatRequest {
            system,
            user,
            model_tag: self.settings.model.clone(),
            max_tokens: self.settings.max_tokens,
            temperature: self.settings.temperature,
        }
    }

    pub fn request_tokens(req: &ChatRequest) -> usize {
        estimate_tokens(&req.system) + estimate_tokens(&req.user)
    }

    /// Largest part body, in estimated tokens.
    pub fn part_capacity(&self) -> usize {
        (self.config.context_budget_tokens as f64 * self.config.part_fraction).floor() as usize
    }

    fn call(&self, body: &str, requests: &AtomicUsize) -> Result<String, ProviderError> {
        let req = self.render(body);
        let key = ResponseCache::key(&req);
        requests.fetch_add(1, Ordering::Relaxed);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let text = self.chat.chat(&req)?.text;
        self.cache
            .put(&key, &text)
            .map_err(|e| ProviderError::Cache(e.to_string()))?;
        Ok(text)
    }

    /// Cuts `text` into pieces of at most `capacity` estimated tokens,
    /// preferring sentence boundaries.
    pub fn split_parts(&self, text: &str, capacity: usize) -> Vec<String> {
        let mut pieces: Vec<&str> = Vec::new();
        for s in self.segmenter.sentences(text) {
            if estimate_tokens(s) <= capacity {
                pieces.push(s);
            } else {
                // An over-long sentence is cut at character boundaries.
                let max_chars = (capacity * 40 / 11).max(1);
                let mut rest = s;
                while !rest.is_empty() {
                    let cut = rest.char_indices().nth(max_chars).map_or(rest.len(), |(i, _)| i);
                    pieces.push(&rest[..cut]);
                    rest = &rest[cut..];
                }
            }
        }
        let mut parts: Vec<String> = Vec::new();
        let mut current = String::new();
        for p in pieces {
            let candidate = if current.is_empty() { p.to_string() } else { format!("{current} {p}") };
            if !current.is_empty() && estimate_tokens(&candidate) > capacity {
                parts.push(std::mem::take(&mut current));
                current = p.to_string();
            } else {
                current = candidate;
            }
        }
        if !current.is_empty() {
            parts.push(current);
        }
        parts
    }

    fn compress_text(&self, body: &str, depth: usize, requests: &AtomicUsize) -> Result<Outcome, CompressorError> {
        let budget = self.config.context_budget_tokens;
        if Self::request_tokens(&self.render(body)) <= budget {
            let text = self.call(body, requests).map_err(|e| self.tag(e))?;
            return Ok(Outcome { text, stage: Stage::SinglePass, parts: 1 });
        }
        if depth >= MAX_MERGE_DEPTH {
            return Err(CompressorError::Budget(format!("part reports still exceed the budget after {depth} merge levels")));
        }
        let capacity = self.part_capacity();
        let overhead = Self::request_tokens(&self.render(""));
        if capacity == 0 || overhead + capacity > budget {
            return Err(CompressorError::Budget(format!(
                "prompt overhead of {overhead} tokens leaves no room for {capacity}-token parts within {budget}"
            )));
        }
        let parts = self.split_parts(body, capacity);
        let mut reports = Vec::with_capacity(parts.len());
        for part in &parts {
            reports.push(self.call(part, requests).map_err(|e| self.tag(e))?);
        }
        let merged_input = reports.join("\n\n");
        if estimate_tokens(&merged_input) >= estimate_tokens(body) {
            return Err(CompressorError::Budget("part reports are not shorter than their input".into()));
        }
        let merged = self.compress_text(&merged_input, depth + 1, requests)?;
        Ok(Outcome { text: merged.text, stage: Stage::Merged, parts: parts.len() })
    }

    fn tag(&self, source: ProviderError) -> CompressorError {
        // Document identity is attached by the caller.
        CompressorError::Provider { doc_id: DocId(String::new()), idx: 0, source }
    }

    pub fn compress_document(&self, doc: &ReferenceDoc) -> Result<CompressedReport, CompressorError> {
        if doc.body_markdown.trim().is_empty() {
            return Err(CompressorError::Validation(format!("document {} (idx {}) is empty", doc.id, doc.idx)));
        }
        let requests = AtomicUsize::new(0);
        let out = self.compress_text(&doc.body_markdown, 0, &requests).map_err(|e| match e {
            CompressorError::Provider { source, .. } => {
                CompressorError::Provider { doc_id: doc.id.clone(), idx: doc.idx, source }
            }
            other => other,
        })?;
        Ok(CompressedReport {
            doc_id: doc.id.clone(),
            idx: doc.idx,
            title: doc.title.clone(),
            word_count: word_count(&out.text),
            report_markdown: out.text,
            stage: out.stage,
            parts: out.parts,
            requests: requests.into_inner(),
        })
    }

    /// Compresses every document with at most `max_concurrency` in flight.
    /// `progress(done, total)` is called after each document.
    pub fn compress_corpus(
        &self,
        docs: &[ReferenceDoc],
        progress: &(dyn Fn(usize, usize) + Sync),
    ) -> Result<CorpusOutcome, CompressorError> {
        if docs.is_empty() {
            return Err(CompressorError::Validation("no documents to compress".into()));
        }
        let next = AtomicUsize::new(0);
        let done = AtomicUsize::new(0);
        let results: Mutex<Vec<Result<CompressedReport, DocFailure>>> = Mutex::default();
        let workers = self.config.max_concurrency.clamp(1, docs.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(doc) = docs.get(i) else { break };
                    let result = self.compress_document(doc).map_err(|e| DocFailure {
                        doc_id: doc.id.clone(),
                        idx: doc.idx,
                        error: e.to_string(),
                    });
                    results.lock().unwrap().push(result);
                    progress(done.fetch_add(1, Ordering::SeqCst) + 1, docs.len());
                });
            }
        });
        let (mut reports, mut failures) = (Vec::new(), Vec::new());
        for r in results.into_inner().unwrap() {
            match r {
                Ok(rep) => reports.push(rep),
                Err(f) => failures.push(f),
            }
        }
        if reports.is_empty() {
            return Err(CompressorError::BatchFailed(failures.len()));
        }
        reports.sort_by_key(|r| r.idx);
        failures.sort_by_key(|f| f.idx);
        Ok(CorpusOutcome { reports, failures })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts::PromptSet;
    use crate::providers::mock::MockChat;

    fn compressor(mock: Arc<MockChat>, budget: usize) -> Compressor {
        let config = CompressorConfig { context_budget_tokens: budget, ..Default::default() };
        Compressor::new(mock, ChatBackendConfig::default(), PromptSet::builtin().compression, config, Segmenter::default())
    }

    #[test]
    fn estimator_matches_formula() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcd"), 2); // ceil(1.1)
        assert_eq!(estimate_tokens(&"x".repeat(400)), 110);
    }

    #[test]
    fn short_document_is_single_pass() {
        let report = "word ".repeat(100).trim().to_string();
        let mock = Arc::new(MockChat::fixed(report.clone()));
        let c = compressor(mock.clone(), 100_000);
        let doc = ReferenceDoc::new(1, "T", "Short body. Two sentences.".into(), &Segmenter::default());
        let r = c.compress_document(&doc).unwrap();
        assert_eq!((r.stage, r.report_markdown.as_str(), r.word_count), (Stage::SinglePass, report.as_str(), 100));
        assert_eq!(mock.calls(), 1);
        let req = &mock.requests()[0];
        assert!(req.system.contains("around 4,000 words"));
        assert!(req.user.ends_with("Short body. Two sentences."));
    }

    #[test]
    fn empty_document_is_rejected() {
        let c = compressor(Arc::new(MockChat::echo()), 1000);
        let doc = ReferenceDoc::new(1, "T", "   ".into(), &Segmenter::default());
        assert!(matches!(c.compress_document(&doc), Err(CompressorError::Validation(_))));
    }

    #[test]
    fn recompression_is_served_from_cache() {
        let mock = Arc::new(MockChat::fixed("report"));
        let c = compressor(mock.clone(), 100_000);
        let doc = ReferenceDoc::new(1, "T", "Body text here.".into(), &Segmenter::default());
        c.compress_document(&doc).unwrap();
        c.compress_document(&doc).unwrap();
        assert_eq!(mock.calls(), 1);
    }

    #[test]
    fn split_respects_capacity() {
        let c = compressor(Arc::new(MockChat::echo()), 1000);
        let text = (0..200).map(|i| format!("Sentence number {i} is here.")).collect::<Vec<_>>().join(" ");
        let parts = c.split_parts(&text, 100);
        assert!(parts.len() > 1);
        assert!(parts.iter().all(|p| estimate_tokens(p) <= 100));
        assert_eq!(parts.join(" "), text);
        let long = "x".repeat(1000);
        assert!(c.split_parts(&long, 50).iter().all(|p| estimate_tokens(p) <= 50));
    }
}
