//! ROUGE-N and ROUGE-L over lowercase alphanumeric tokens.
//!
//! Tokenization lowercases and splits on every non-alphanumeric character;
//! there is no stemming or stopword removal.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(overlap, candidate_total);
        let recall = ratio(overlap, reference_total);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Self { precision, recall, f1 }
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap. `n = 0` scores zero.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Prf {
    let (c, r) = (tokenize(candidate), tokenize(reference));
    let (cc, rc) = (ngram_counts(&c, n), ngram_counts(&r, n));
    let overlap = cc.iter().map(|(g, &k)| k.min(rc.get(g).copied().unwrap_or(0))).sum();
    Prf::from_counts(overlap, cc.values().sum(), rc.values().sum())
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l(candidate: &str, reference: &str) -> Prf {
    let (c, r) = (tokenize(candidate), tokenize(reference));
    Prf::from_counts(lcs_len(&c, &r), c.len(), r.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_unigrams() {
        let p = rouge_n("the cat", "the cat sat", 1);
        assert_eq!(p.precision, 1.0);
        assert!((p.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((p.f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn clipping_limits_repeated_grams() {
        let p = rouge_n("the the the", "the cat", 1);
        assert!((p.precision - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(p.recall, 0.5);
    }

    #[test]
    fn lcs_example() {
        let p = rouge_l("a b c d", "a x c y");
        assert_eq!((p.precision, p.recall, p.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn degenerate_inputs_are_zero() {
        assert_eq!(rouge_l("", "a b"), Prf::default());
        assert_eq!(rouge_n("", "", 2), Prf::default());
        assert_eq!(rouge_n("x y", "a b", 1).f1, 0.0);
        assert_eq!(rouge_n("Same, TEXT!", "same text", 2).f1, 1.0);
    }
}
