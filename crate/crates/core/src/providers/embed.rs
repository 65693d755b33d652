use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::cache::{CacheKey, VectorCache};
use super::retry::Reliability;
use super::ProviderError;

/// Tolerance on the Euclidean norm of every returned vector.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

pub trait EmbeddingProvider: Send + Sync {
    /// Raw (not necessarily normalized) embeddings, one per input, in order.
    fn embed(&self, texts: &[String], model_tag: &str) -> Result<Vec<Vec<f32>>, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Linking,
    HeadingEval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingProfile {
    pub purpose: Purpose,
    pub model_tag: String,
    pub dim: usize,
}

impl EmbeddingProfile {
    pub fn new(purpose: Purpose, model_tag: impl Into<String>, dim: usize) -> Self {
        Self { purpose, model_tag: model_tag.into(), dim }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f32>,
    pub dim: usize,
    pub model_tag: String,
}

impl EmbeddingVector {
    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }
}

pub(crate) fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
}

/// Scales `v` to unit length (accumulating in f64). Fails on zero or non-finite input.
pub fn normalize(mut v: Vec<f32>) -> Result<Vec<f32>, ProviderError> {
    let n = l2_norm(&v);
    if !n.is_finite() || n == 0.0 {
        return Err(ProviderError::Integrity(format!("cannot normalize vector with norm {n}")));
    }
    for x in &mut v {
        *x = (f64::from(*x) / n) as f32;
    }
    Ok(v)
}

/// Cached, normalizing embedding client.
pub struct Embedder {
    provider: Arc<dyn EmbeddingProvider>,
    cache: Arc<dyn VectorCache>,
    reliability: Reliability,
    max_batch: usize,
}

impl Embedder {
    pub fn new(
        provider: Arc<dyn EmbeddingProvider>,
        cache: Arc<dyn VectorCache>,
        reliability: Reliability,
        max_batch: usize,
    ) -> Self {
        Self { provider, cache, reliability, max_batch: max_batch.max(1) }
    }

    pub fn max_batch(&self) -> usize {
        self.max_batch
    }

    /// Embeds one batch (at most `max_batch` texts). Cached entries are served
    /// without a provider call; misses are fetched in one request.
    pub fn embed_batch<S: AsRef<str>>(
        &self,
        texts: &[S],
        profile: &EmbeddingProfile,
    ) -> Result<Vec<EmbeddingVector>, ProviderError> {
        if texts.len() > self.max_batch {
            return Err(ProviderError::Validation(format!(
                "batch of {} exceeds the maximum of {}",
                texts.len(),
                self.max_batch
            )));
        }
        if let Some(i) = texts.iter().position(|t| t.as_ref().trim().is_empty()) {
            return Err(ProviderError::Validation(format!("text at position {i} is empty")));
        }

        let keys: Vec<CacheKey> = texts.iter().map(|t| CacheKey::new(&profile.model_tag, t.as_ref())).collect();
        let mut out: Vec<Option<Vec<f32>>> = keys.iter().map(|k| self.cache.get(k)).collect();
        let misses: Vec<usize> = (0..texts.len()).filter(|&i| out[i].is_none()).collect();

        if !misses.is_empty() {
            let request: Vec<String> = misses.iter().map(|&i| texts[i].as_ref().to_string()).collect();
            let raw = self.reliability.run(|| self.provider.embed(&request, &profile.model_tag))?;
            if raw.len() != request.len() {
                return Err(ProviderError::Integrity(format!(
                    "provider returned {} vectors for {} inputs",
                    raw.len(),
                    request.len()
                )));
            }
            for (&i, v) in misses.iter().zip(raw) {
                if v.len() != profile.dim {
                    return Err(ProviderError::Integrity(format!(
                        "model {} returned dimension {}, profile expects {}",
                        profile.model_tag,
                        v.len(),
                        profile.dim
                    )));
                }
                let v = normalize(v)?;
                self.cache.put(&keys[i], &v)?;
                out[i] = Some(v);
            }
        }

        out.into_iter()
            .map(|v| {
                let values = v.expect("every slot filled");
                if values.len() != profile.dim {
                    return Err(ProviderError::Integrity(format!(
                        "cached vector has dimension {}, profile expects {}",
                        values.len(),
                        profile.dim
                    )));
                }
                Ok(EmbeddingVector { dim: values.len(), values, model_tag: profile.model_tag.clone() })
            })
            .collect()
    }

    /// Embeds any number of texts in `max_batch`-sized requests.
    pub fn embed_all<S: AsRef<str>>(
        &self,
        texts: &[S],
        profile: &EmbeddingProfile,
    ) -> Result<Vec<EmbeddingVector>, ProviderError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.max_batch) {
            out.extend(self.embed_batch(chunk, profile)?);
        }
        Ok(out)
    }

    pub fn embed_one(&self, text: &str, profile: &EmbeddingProfile) -> Result<EmbeddingVector, ProviderError> {
        Ok(self.embed_batch(&[text], profile)?.remove(0))
    }
}
