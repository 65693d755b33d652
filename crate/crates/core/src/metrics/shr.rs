//! Soft cardinality and soft heading recall over embedded heading sets.
//!
//! `Sim(a, b)` is cosine similarity clamped to `[0, 1]`, and exactly 1 for
//! bitwise-identical vectors. `card(T) = Σ_i 1 / Σ_j Sim(t_i, t_j)`;
//! `SHR(G, R) = (card R + card G − card(R ∪ G)) / card R` with `R ∪ G` the
//! concatenated multiset. Every sum is correctly rounded, so duplicating a
//! set halves each term exactly and `SHR(R, R)` is exactly 1.

use serde::{Deserialize, Serialize};

use super::fsum::fsum;
use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadingRole {
    Generated,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadingSet {
    pub titles: Vec<String>,
    pub embeddings: Vec<Vec<f32>>,
    pub role: HeadingRole,
    pub model_tag: String,
}

impl HeadingSet {
    pub fn new(
        titles: Vec<String>,
        embeddings: Vec<Vec<f32>>,
        role: HeadingRole,
        model_tag: impl Into<String>,
    ) -> Result<Self, MetricsError> {
        if titles.is_empty() {
            return Err(MetricsError::Validation("heading set is empty".into()));
        }
        if titles.len() != embeddings.len() {
            return Err(MetricsError::Validation(format!(
                "{} titles but {} embeddings",
                titles.len(),
                embeddings.len()
            )));
        }
        let dim = embeddings[0].len();
        if embeddings.iter().any(|e| e.len() != dim) {
            return Err(MetricsError::Integrity("heading embeddings differ in dimension".into()));
        }
        Ok(Self { titles, embeddings, role, model_tag: model_tag.into() })
    }

    pub fn len(&self) -> usize {
        self.titles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.titles.is_empty()
    }
}

/// Clamped cosine similarity.
pub fn sim(a: &[f32], b: &[f32]) -> f64 {
    if a == b {
        return 1.0;
    }
    let (mut ab, mut aa, mut bb) = (0f64, 0f64, 0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return 0.0;
    }
    (ab / (aa.sqrt() * bb.sqrt())).clamp(0.0, 1.0)
}

/// Soft cardinality of a multiset of vectors.
pub fn soft_cardinality_of(vectors: &[&[f32]]) -> Result<f64, MetricsError> {
    if vectors.is_empty() {
        return Err(MetricsError::Validation("soft cardinality of an empty set".into()));
    }
    let terms = vectors.iter().map(|a| 1.0 / fsum(vectors.iter().map(|b| sim(a, b))));
    Ok(fsum(terms))
}

pub fn soft_cardinality(set: &HeadingSet) -> Result<f64, MetricsError> {
    let refs: Vec<&[f32]> = set.embeddings.iter().map(Vec::as_slice).collect();
    soft_cardinality_of(&refs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrBreakdown {
    pub card_reference: f64,
    pub card_generated: f64,
    pub card_union: f64,
    pub card_intersection: f64,
    pub shr: f64,
}

pub fn soft_heading_recall_breakdown(generated: &HeadingSet, reference: &HeadingSet) -> Result<ShrBreakdown, MetricsError> {
    if generated.model_tag != reference.model_tag {
        return Err(MetricsError::Integrity(format!(
            "heading sets embedded with different models ({} vs {})",
            generated.model_tag, reference.model_tag
        )));
    }
    if generated.embeddings.first().map(Vec::len) != reference.embeddings.first().map(Vec::len) {
        return Err(MetricsError::Integrity("heading sets differ in embedding dimension".into()));
    }
    let card_reference = soft_cardinality(reference)?;
    let card_generated = soft_cardinality(generated)?;
    let union: Vec<&[f32]> = reference.embeddings.iter().chain(&generated.embeddings).map(Vec::as_slice).collect();
    let card_union = soft_cardinality_of(&union)?;
    let card_intersection = card_reference + card_generated - card_union;
    Ok(ShrBreakdown { card_reference, card_generated, card_union, card_intersection, shr: card_intersection / card_reference })
}

/// Soft heading recall of `generated` against `reference`.
pub fn soft_heading_recall(generated: &HeadingSet, reference: &HeadingSet) -> Result<f64, MetricsError> {
    Ok(soft_heading_recall_breakdown(generated, reference)?.shr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(vs: Vec<Vec<f32>>, role: HeadingRole) -> HeadingSet {
        let titles = (0..vs.len()).map(|i| format!("t{i}")).collect();
        HeadingSet::new(titles, vs, role, "m").unwrap()
    }

    #[test]
    fn identical_titles_count_once() {
        let s = set(vec![vec![0.6, 0.8]; 4], HeadingRole::Reference);
        assert_eq!(soft_cardinality(&s).unwrap(), 1.0);
    }

    #[test]
    fn orthogonal_titles_count_fully() {
        let s = set(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, -1.0]], HeadingRole::Reference);
        assert_eq!(soft_cardinality(&s).unwrap(), 3.0);
    }

    #[test]
    fn self_recall_is_exactly_one() {
        let r = set(vec![vec![0.3, 0.1, 0.9], vec![0.5, 0.5, 0.1], vec![0.9, 0.2, 0.3]], HeadingRole::Reference);
        let mut g = r.clone();
        g.role = HeadingRole::Generated;
        assert_eq!(soft_heading_recall(&g, &r).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_sets_recall_zero() {
        let r = set(vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]], HeadingRole::Reference);
        let g = set(vec![vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, -1.0]], HeadingRole::Generated);
        assert_eq!(soft_heading_recall(&g, &r).unwrap(), 0.0);
    }

    #[test]
    fn model_mismatch_is_rejected() {
        let r = set(vec![vec![1.0, 0.0]], HeadingRole::Reference);
        let mut g = set(vec![vec![1.0, 0.0]], HeadingRole::Generated);
        g.model_tag = "other".into();
        assert!(matches!(soft_heading_recall(&g, &r), Err(MetricsError::Integrity(_))));
        assert!(HeadingSet::new(vec![], vec![], HeadingRole::Reference, "m").is_err());
    }

    #[test]
    fn similarity_is_clamped_and_symmetric() {
        assert_eq!(sim(&[1.0, 0.0], &[-1.0, 0.0]), 0.0);
        let (a, b) = ([0.3f32, 0.7, 0.1], [0.9f32, 0.05, 0.4]);
        assert_eq!(sim(&a, &b), sim(&b, &a));
    }
}
