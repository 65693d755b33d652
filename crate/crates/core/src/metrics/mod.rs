//! Evaluation metrics: soft heading recall, ROUGE-1/2/L, correction rate.

pub mod correction;
pub mod dataset;
pub mod fsum;
pub mod rouge;
pub mod shr;

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use correction::{correction_rate, CorrectionStats, Normalization};
pub use rouge::{rouge_l, rouge_n, Prf};
pub use shr::{sim, soft_cardinality, soft_heading_recall, HeadingRole, HeadingSet, ShrBreakdown};

use crate::ingest::Segmenter;
use crate::providers::{Embedder, EmbeddingProfile, ProviderError};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("invalid metric input: {0}")]
    Validation(String),
    #[error("metric integrity error: {0}")]
    Integrity(String),
    #[error("correction rate undefined: {0}")]
    UndefinedRate(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub shr: ShrBreakdown,
    pub rouge1: Prf,
    pub rouge2: Prf,
    pub rouge_l: Prf,
    pub correction: Option<CorrectionStats>,
    /// Traceable fraction of citations; `None` when there are no citations.
    pub citation_accuracy: Option<f64>,
    pub heading_model: String,
    /// SHA-256 of every input text, keyed by input name.
    pub input_hashes: BTreeMap<String, String>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Default)]
pub struct EvalInputs {
    pub generated_text: String,
    pub reference_text: String,
    pub generated_headings: Vec<String>,
    pub reference_headings: Vec<String>,
    /// First draft, for the correction rate against `generated_text`.
    pub initial_draft: Option<String>,
    pub citation_accuracy: Option<f64>,
    pub normalization: Normalization,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Text of every Markdown heading line, in order.
pub fn markdown_headings(text: &str) -> Vec<String> {
    text.lines()
        .filter_map(|l| {
            let t = l.trim_start();
            let hashes = t.chars().take_while(|&c| c == '#').count();
            (1..=6).contains(&hashes).then(|| t[hashes..].trim()).filter(|h| !h.is_empty() && t[hashes..].starts_with(' '))
        })
        .map(str::to_string)
        .collect()
}

pub fn embed_headings(
    titles: Vec<String>,
    role: HeadingRole,
    embedder: &Embedder,
    profile: &EmbeddingProfile,
) -> Result<HeadingSet, MetricsError> {
    let vectors = embedder.embed_all(&titles, profile)?;
    HeadingSet::new(titles, vectors.into_iter().map(|v| v.values).collect(), role, profile.model_tag.clone())
}

pub fn evaluate(
    inputs: &EvalInputs,
    embedder: &Embedder,
    heading_profile: &EmbeddingProfile,
    segmenter: &Segmenter,
) -> Result<MetricReport, MetricsError> {
    let generated = embed_headings(inputs.generated_headings.clone(), HeadingRole::Generated, embedder, heading_profile)?;
    let reference = embed_headings(inputs.reference_headings.clone(), HeadingRole::Reference, embedder, heading_profile)?;
    let shr = shr::soft_heading_recall_breakdown(&generated, &reference)?;
    let correction = match &inputs.initial_draft {
        Some(initial) => Some(correction_rate(initial, &inputs.generated_text, segmenter, inputs.normalization)?),
        None => None,
    };

    let mut input_hashes = BTreeMap::new();
    input_hashes.insert("generated_text".into(), sha256_hex(&inputs.generated_text));
    input_hashes.insert("reference_text".into(), sha256_hex(&inputs.reference_text));
    input_hashes.insert("generated_headings".into(), sha256_hex(&inputs.generated_headings.join("\n")));
    input_hashes.insert("reference_headings".into(), sha256_hex(&inputs.reference_headings.join("\n")));
    if let Some(initial) = &inputs.initial_draft {
        input_hashes.insert("initial_draft".into(), sha256_hex(initial));
    }

    Ok(MetricReport {
        shr,
        rouge1: rouge_n(&inputs.generated_text, &inputs.reference_text, 1),
        rouge2: rouge_n(&inputs.generated_text, &inputs.reference_text, 2),
        rouge_l: rouge_l(&inputs.generated_text, &inputs.reference_text),
        correction,
        citation_accuracy: inputs.citation_accuracy,
        heading_model: heading_profile.model_tag.clone(),
        input_hashes,
        created_at: Utc::now(),
    })
}
