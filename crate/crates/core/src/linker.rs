//! Sentence-level citation tracing.
//!
//! Every reference block is embedded once and stored twice: full precision in
//! a [`FlatIndex`] and quantized in an [`IvfSq8Index`]. A sentence is traced by
//! fetching `max(4k, 32)` candidates from the IVF index and reranking them
//! exactly against the flat vectors.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ann::{AnnError, BlockKey, FlatIndex, IvfParams, IvfSq8Index, SearchHit};
use crate::generator::{parse_citations, strip_citations, SectionDraft};
use crate::ingest::{Block, DocId, ReferenceDoc, Segmenter};
use crate::providers::{Embedder, EmbeddingProfile, ProviderError};

pub const BLOCKS_FILE: &str = "blocks.json";
pub const FLAT_FILE: &str = "flat.bin";
pub const IVF_FILE: &str = "ivfsq8.bin";

#[derive(Debug, thiserror::Error)]
pub enum LinkerError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error(transparent)]
    Index(#[from] AnnError),
    #[error("embedding failed: {0}")]
    Provider(#[from] ProviderError),
    #[error("index files in {path} disagree: {reason}")]
    Integrity { path: PathBuf, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkerConfig {
    /// Minimum exact score for a citation to count as traceable.
    pub threshold: f64,
    /// Hits reported per sentence.
    pub top_k: usize,
    /// When set, the best hit must come from one of the cited documents.
    pub require_cited_document: bool,
}

impl Default for LinkerConfig {
    fn default() -> Self {
        Self { threshold: 0.55, top_k: 5, require_cited_document: true }
    }
}

/// IVF build parameters; unset values follow the corpus size.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexConfig {
    pub nlist: Option<usize>,
    /// Lists probed per query.
    pub nprobe: Option<usize>,
    pub seed: u64,
}

impl IndexConfig {
    pub fn params(&self) -> IvfParams {
        IvfParams { nlist: self.nlist, nprobe: self.nprobe, seed: self.seed, ..Default::default() }
    }
}

/// Index metadata stored next to the blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCatalog {
    pub model_tag: String,
    pub dim: usize,
    pub blocks: Vec<Block>,
}

pub struct LinkIndex {
    catalog: BlockCatalog,
    positions: HashMap<BlockKey, usize>,
    flat: FlatIndex,
    ivf: IvfSq8Index,
}

fn block_key(b: &Block) -> BlockKey {
    BlockKey { doc_id: b.doc_id.clone(), block_index: b.block_index as u32 }
}

impl LinkIndex {
    /// Embeds `blocks` with `profile` and builds both indexes.
    pub fn build(
        blocks: Vec<Block>,
        embedder: &Embedder,
        profile: &EmbeddingProfile,
        config: &IndexConfig,
    ) -> Result<Self, LinkerError> {
        if blocks.is_empty() {
            return Err(LinkerError::Validation("no blocks to index".into()));
        }
        let texts: Vec<&str> = blocks.iter().map(|b| b.text.as_str()).collect();
        let vectors: Vec<Vec<f32>> = embedder.embed_all(&texts, profile)?.into_iter().map(|v| v.values).collect();
        let keys: Vec<BlockKey> = blocks.iter().map(block_key).collect();
        let flat = FlatIndex::build(keys.clone(), &vectors)?;
        let ivf = IvfSq8Index::build(keys, &vectors, config.params())?;
        let catalog = BlockCatalog { model_tag: profile.model_tag.clone(), dim: profile.dim, blocks };
        Ok(Self::assemble(catalog, flat, ivf))
    }

    fn assemble(catalog: BlockCatalog, flat: FlatIndex, ivf: IvfSq8Index) -> Self {
        let positions = catalog.blocks.iter().enumerate().map(|(i, b)| (block_key(b), i)).collect();
        Self { catalog, positions, flat, ivf }
    }

    pub fn catalog(&self) -> &BlockCatalog {
        &self.catalog
    }

    pub fn flat(&self) -> &FlatIndex {
        &self.flat
    }

    pub fn ivf(&self) -> &IvfSq8Index {
        &self.ivf
    }

    pub fn block(&self, key: &BlockKey) -> Option<&Block> {
        self.positions.get(key).map(|&i| &self.catalog.blocks[i])
    }

    pub fn save(&self, dir: &Path) -> Result<(), LinkerError> {
        std::fs::create_dir_all(dir).map_err(|source| LinkerError::Io { path: dir.to_path_buf(), source })?;
        let path = dir.join(BLOCKS_FILE);
        let json = serde_json::to_vec_pretty(&self.catalog).expect("catalog serializes");
        crate::providers::cache::write_atomic(&path, &json).map_err(|source| LinkerError::Io { path, source })?;
        self.flat.save(&dir.join(FLAT_FILE))?;
        self.ivf.save(&dir.join(IVF_FILE))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, LinkerError> {
        let path = dir.join(BLOCKS_FILE);
        let bytes = std::fs::read(&path).map_err(|source| LinkerError::Io { path: path.clone(), source })?;
        let catalog: BlockCatalog = serde_json::from_slice(&bytes)
            .map_err(|e| LinkerError::Integrity { path: path.clone(), reason: e.to_string() })?;
        let flat = FlatIndex::load(&dir.join(FLAT_FILE))?;
        let ivf = IvfSq8Index::load(&dir.join(IVF_FILE))?;
        let keys: Vec<BlockKey> = catalog.blocks.iter().map(block_key).collect();
        let disagree = |reason: &str| LinkerError::Integrity { path: dir.to_path_buf(), reason: reason.into() };
        if flat.keys() != keys.as_slice() || ivf.keys() != keys.as_slice() {
            return Err(disagree("block keys differ between files"));
        }
        if flat.dim() != catalog.dim || ivf.dim() != catalog.dim {
            return Err(disagree("vector dimensions differ between files"));
        }
        Ok(Self::assemble(catalog, flat, ivf))
    }

    /// Top `k` blocks for a unit query: IVF candidates reranked exactly.
    pub fn search(&self, query: &[f32], k: usize, nprobe: Option<usize>) -> Result<Vec<SearchHit>, LinkerError> {
        let wide = (4 * k).max(32);
        let candidates = self.ivf.search(query, wide, nprobe.unwrap_or(self.ivf.default_nprobe()))?;
        let mut hits: Vec<SearchHit> = candidates
            .into_iter()
            .map(|h| {
                let score = self.flat.score(&h.key, query).expect("indexes share keys");
                SearchHit { key: h.key, score }
            })
            .collect();
        hits.sort_by(crate::ann::hit_order);
        hits.truncate(k);
        Ok(hits)
    }

    /// Embeds `sentence` (citation marks removed) and returns its top `k` blocks.
    pub fn trace_sentence(
        &self,
        sentence: &str,
        embedder: &Embedder,
        profile: &EmbeddingProfile,
        k: usize,
    ) -> Result<Vec<SearchHit>, LinkerError> {
        let query = strip_citations(sentence);
        if query.trim().is_empty() {
            return Err(LinkerError::Validation("sentence is empty".into()));
        }
        self.check_profile(profile)?;
        let v = embedder.embed_one(query.trim(), profile)?;
        self.search(&v.values, k, None)
    }

    fn check_profile(&self, profile: &EmbeddingProfile) -> Result<(), LinkerError> {
        if profile.model_tag != self.catalog.model_tag || profile.dim != self.catalog.dim {
            return Err(LinkerError::Validation(format!(
                "index was built with {} (dim {}), query profile is {} (dim {})",
                self.catalog.model_tag, self.catalog.dim, profile.model_tag, profile.dim
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkHit {
    pub doc_id: DocId,
    /// Citation index of the document.
    pub idx: Option<u32>,
    pub block_index: u32,
    pub score: f64,
    pub block_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationLink {
    /// Position of the sentence in the draft.
    pub sentence_index: usize,
    /// Byte range of the sentence in the draft text.
    pub start: usize,
    pub end: usize,
    pub sentence: String,
    /// Indices inside the citation mark, or `None` for an uncited sentence.
    pub cited: Option<Vec<u32>>,
    /// Best blocks, best first.
    pub hits: Vec<LinkHit>,
    /// Whether the mark is backed by the best hit. Always false when uncited.
    pub traceable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationAccuracyReport {
    pub sentences: usize,
    pub citations: usize,
    pub traceable: usize,
    /// `traceable / citations`; null without citations.
    pub accuracy: Option<f64>,
    /// Citation indices with no matching reference.
    pub unknown_indices: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSet {
    pub revision: usize,
    pub threshold: f64,
    pub links: Vec<CitationLink>,
    pub report: CitationAccuracyReport,
    pub created_at: DateTime<Utc>,
}

/// Byte ranges of the sentences of `text` that are not headings.
/// A sentence made only of citation marks is folded into the one before it.
fn draft_sentences(text: &str, segmenter: &Segmenter) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for span in segmenter.segment(text) {
        let s = span.slice(text);
        if s.starts_with('#') {
            continue;
        }
        let marks_only = strip_citations(s).trim().trim_matches(|c: char| c.is_ascii_punctuation()).is_empty();
        match out.last_mut() {
            Some(last) if marks_only && text[last.1..span.start].trim().is_empty() => last.1 = span.end,
            _ => out.push((span.start, span.end)),
        }
    }
    out
}

/// Everything needed to trace drafts against one chapter's index.
pub struct Verifier<'a> {
    pub index: &'a LinkIndex,
    pub embedder: &'a Embedder,
    pub profile: &'a EmbeddingProfile,
    pub segmenter: &'a Segmenter,
    pub config: &'a LinkerConfig,
}

impl Verifier<'_> {
    /// Traces every sentence of `draft`.
    pub fn verify_draft(
        &self,
        draft: &SectionDraft,
        revision: usize,
        references: &[ReferenceDoc],
    ) -> Result<LinkSet, LinkerError> {
        verify_draft(self, draft, revision, references)
    }
}

fn verify_draft(
    v: &Verifier<'_>,
    draft: &SectionDraft,
    revision: usize,
    references: &[ReferenceDoc],
) -> Result<LinkSet, LinkerError> {
    let Verifier { index, embedder, profile, segmenter, config } = *v;
    index.check_profile(profile)?;
    if config.top_k == 0 {
        return Err(LinkerError::Validation("top_k must be at least 1".into()));
    }
    let by_idx: BTreeMap<u32, &DocId> = references.iter().map(|r| (r.idx, &r.id)).collect();
    let idx_of: HashMap<&DocId, u32> = references.iter().map(|r| (&r.id, r.idx)).collect();

    let text = &draft.text_markdown;
    let spans = draft_sentences(text, segmenter);
    let queries: Vec<(usize, usize, String)> = spans
        .into_iter()
        .map(|(s, e)| (s, e, strip_citations(&text[s..e]).trim().to_string()))
        .filter(|(_, _, q)| !q.is_empty())
        .collect();
    let texts: Vec<&str> = queries.iter().map(|q| q.2.as_str()).collect();
    let vectors = embedder.embed_all(&texts, profile)?;

    let mut links = Vec::new();
    let mut unknown = BTreeSet::new();
    for (n, ((start, end, _), v)) in queries.iter().zip(&vectors).enumerate() {
        let hits: Vec<LinkHit> = index
            .search(&v.values, config.top_k, None)?
            .into_iter()
            .map(|h| LinkHit {
                idx: idx_of.get(&h.key.doc_id).copied(),
                block_text: index.block(&h.key).map(|b| b.text.clone()).unwrap_or_default(),
                doc_id: h.key.doc_id,
                block_index: h.key.block_index,
                score: h.score,
            })
            .collect();
        let sentence = text[*start..*end].to_string();
        let marks = parse_citations(&sentence);
        let base = CitationLink {
            sentence_index: n,
            start: *start,
            end: *end,
            sentence,
            cited: None,
            hits,
            traceable: false,
        };
        if marks.is_empty() {
            links.push(base);
            continue;
        }
        for mark in marks {
            let cited_docs: BTreeSet<&DocId> = mark
                .indices
                .iter()
                .filter_map(|i| {
                    let doc = by_idx.get(i).copied();
                    if doc.is_none() {
                        unknown.insert(*i);
                    }
                    doc
                })
                .collect();
            let traceable = base.hits.first().is_some_and(|best| {
                best.score >= config.threshold && (!config.require_cited_document || cited_docs.contains(&best.doc_id))
            });
            links.push(CitationLink { cited: Some(mark.indices), traceable, ..base.clone() });
        }
    }

    Ok(LinkSet {
        revision,
        threshold: config.threshold,
        report: summarize(&links, queries.len(), unknown.into_iter().collect()),
        links,
        created_at: Utc::now(),
    })
}

fn summarize(links: &[CitationLink], sentences: usize, unknown_indices: Vec<u32>) -> CitationAccuracyReport {
    let citations = links.iter().filter(|l| l.cited.is_some()).count();
    let traceable = links.iter().filter(|l| l.traceable).count();
    CitationAccuracyReport {
        sentences,
        citations,
        traceable,
        accuracy: (citations > 0).then(|| traceable as f64 / citations as f64),
        unknown_indices,
    }
}

impl LinkSet {
    /// Re-applies the traceability rule at another threshold using the stored
    /// hit scores; no embedding or search happens.
    pub fn with_threshold(&self, threshold: f64, require_cited_document: bool) -> LinkSet {
        let links: Vec<CitationLink> = self
            .links
            .iter()
            .map(|l| {
                let traceable = l.cited.as_ref().is_some_and(|cited| {
                    l.hits.first().is_some_and(|best| {
                        best.score >= threshold
                            && (!require_cited_document || best.idx.is_some_and(|i| cited.contains(&i)))
                    })
                });
                CitationLink { traceable, ..l.clone() }
            })
            .collect();
        LinkSet {
            revision: self.revision,
            threshold,
            report: summarize(&links, self.report.sentences, self.report.unknown_indices.clone()),
            links,
            created_at: self.created_at,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_marks_join_their_sentence() {
        let seg = Segmenter::default();
        let text = "# Head\n\nStone breaks. [3]\n\nWater flows [1].";
        let spans = draft_sentences(text, &seg);
        let got: Vec<&str> = spans.iter().map(|&(s, e)| &text[s..e]).collect();
        assert_eq!(got, ["Stone breaks. [3]", "Water flows [1]."]);
    }
}
