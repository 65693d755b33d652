//! Manual correction rate between an initial and a final draft.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::ingest::Segmenter;

/// Denominator used for the rate. Only [`Normalization::Retained`] is the
/// published definition; the others exist for sensitivity analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `(n - s) / s`
    #[default]
    Retained,
    /// `(n - s) / n`, alternative
    Initial,
    /// `(m - s) / m`, alternative
    Final,
}

impl Normalization {
    pub fn is_alternative(self) -> bool {
        self != Normalization::Retained
    }

    pub fn rate(self, n: usize, m: usize, s: usize) -> Result<f64, MetricsError> {
        let (num, den) = match self {
            Normalization::Retained => (n - s, s),
            Normalization::Initial => (n - s, n),
            Normalization::Final => (m - s, m),
        };
        if den == 0 {
            return Err(MetricsError::UndefinedRate(format!("{self:?} denominator is zero")));
        }
        Ok(num as f64 / den as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionStats {
    /// Sentences in the initial draft.
    pub n: usize,
    /// Sentences in the final draft.
    pub m: usize,
    /// Final-draft sentences found verbatim (after whitespace folding) in the initial draft.
    pub s: usize,
    pub rate: f64,
    pub normalization: Normalization,
    /// True when `normalization` is not the published definition.
    pub alternative: bool,
}

fn fold_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Counts retained sentences; each initial sentence can be matched once.
pub fn retained_count(initial: &[&str], final_: &[&str]) -> usize {
    let mut pool: HashMap<String, usize> = HashMap::new();
    for s in initial {
        *pool.entry(fold_whitespace(s)).or_insert(0) += 1;
    }
    final_
        .iter()
        .filter(|s| match pool.get_mut(&fold_whitespace(s)) {
            Some(c) if *c > 0 => {
                *c -= 1;
                true
            }
            _ => false,
        })
        .count()
}

pub fn correction_rate(
    initial: &str,
    final_: &str,
    segmenter: &Segmenter,
    normalization: Normalization,
) -> Result<CorrectionStats, MetricsError> {
    if initial.trim().is_empty() || final_.trim().is_empty() {
        return Err(MetricsError::Validation("both drafts must be non-empty".into()));
    }
    let a = segmenter.sentences(initial);
    let b = segmenter.sentences(final_);
    let (n, m) = (a.len(), b.len());
    let s = retained_count(&a, &b);
    if s == 0 {
        return Err(MetricsError::UndefinedRate("no sentence of the initial draft survives in the final draft".into()));
    }
    let rate = normalization.rate(n, m, s)?;
    Ok(CorrectionStats { n, m, s, rate, normalization, alternative: normalization.is_alternative() })
}
