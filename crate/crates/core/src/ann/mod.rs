//! Vector similarity search over blocks.
//!
//! [`FlatIndex`] is an exact brute-force scan; [`IvfSq8Index`] partitions rows
//! with k-means and stores them as per-dimension 8-bit codes, probing only the
//! `nprobe` clusters nearest the query. Scores are inner products, which equal
//! cosine similarity for the unit vectors the embedder produces.

mod flat;
mod ivf;
pub mod kmeans;
pub mod sq8;
pub mod synth;

use std::cmp::Ordering;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::ingest::DocId;

pub use flat::{FlatIndex, FLAT_MAGIC, FLAT_VERSION};
pub use ivf::{IvfParams, IvfSq8Index, IVF_MAGIC, IVF_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum AnnError {
    #[error("dimension mismatch: index has {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid index request: {0}")]
    Validation(String),
    #[error("duplicate block key {0}")]
    DuplicateKey(BlockKey),
    #[error("index file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("index file {path} is malformed: {reason}")]
    Format { path: PathBuf, reason: String },
}

/// Identity of an indexed block. Orders by document id, then block index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockKey {
    pub doc_id: DocId,
    pub block_index: u32,
}

impl BlockKey {
    pub fn new(doc_id: impl Into<String>, block_index: u32) -> Self {
        Self { doc_id: DocId(doc_id.into()), block_index }
    }
}

impl std::fmt::Display for BlockKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}#{}", self.doc_id.0, self.block_index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub key: BlockKey,
    pub score: f64,
}

/// Descending score, then ascending key.
pub fn hit_order(a: &SearchHit, b: &SearchHit) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.key.cmp(&b.key))
}

pub(crate) fn top_k(mut hits: Vec<SearchHit>, k: usize) -> Vec<SearchHit> {
    if hits.len() > k {
        hits.select_nth_unstable_by(k - 1, hit_order);
        hits.truncate(k);
    }
    hits.sort_by(hit_order);
    hits
}

pub(crate) fn check_query(query: &[f32], dim: usize, k: usize) -> Result<(), AnnError> {
    if k == 0 {
        return Err(AnnError::Validation("k must be at least 1".into()));
    }
    if query.len() != dim {
        return Err(AnnError::Dimension { expected: dim, got: query.len() });
    }
    Ok(())
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

pub(crate) fn sq_dist(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Fraction of `truth` keys present in `found`.
pub fn recall(found: &[SearchHit], truth: &[SearchHit]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let hits = truth.iter().filter(|t| found.iter().any(|f| f.key == t.key)).count();
    hits as f64 / truth.len() as f64
}
