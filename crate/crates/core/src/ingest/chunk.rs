use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{DocId, IngestError, ReferenceDoc};

/// A window of consecutive sentences from one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub doc_id: DocId,
    pub block_index: usize,
    pub sentence_indices: Vec<usize>,
    pub text: String,
}

/// Sentence-index ranges of a sliding window with stride `window - overlap`.
///
/// Windows start at 0 and advance until one reaches the last sentence, so the
/// final window may be shorter than `window`.
pub fn window_ranges(n_sentences: usize, window: usize, overlap: usize) -> Result<Vec<Range<usize>>, IngestError> {
    if window == 0 || overlap >= window {
        return Err(IngestError::Validation(format!(
            "chunk window must exceed overlap (window={window}, overlap={overlap})"
        )));
    }
    let stride = window - overlap;
    let mut ranges = Vec::new();
    let mut start = 0;
    while start < n_sentences {
        let end = (start + window).min(n_sentences);
        ranges.push(start..end);
        if end == n_sentences {
            break;
        }
        start += stride;
    }
    Ok(ranges)
}

/// Groups a document's sentences into overlapping blocks.
pub fn chunk_blocks(doc: &ReferenceDoc, window: usize, overlap: usize) -> Result<Vec<Block>, IngestError> {
    if doc.sentence_spans.is_empty() {
        return Err(IngestError::EmptyDocument(doc.id.to_string()));
    }
    let sentences = doc.sentences();
    let blocks = window_ranges(sentences.len(), window, overlap)?
        .into_iter()
        .enumerate()
        .map(|(block_index, range)| Block {
            doc_id: doc.id.clone(),
            block_index,
            text: sentences[range.clone()].join(" "),
            sentence_indices: range.collect(),
        })
        .collect();
    Ok(blocks)
}
