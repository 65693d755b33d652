//! Seeded synthetic corpora and chapters with known citation ground truth.
//!
//! Documents are built from pseudo-words: each document draws most words
//! from its own topic vocabulary plus a shared common vocabulary. Distractor
//! sentences use a vocabulary no document contains.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::generator::format_mark;
use crate::ingest::{DocId, ReferenceDoc, Segmenter};

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ren", "tus", "va", "qua", "dor", "phi", "sel", "ni", "gro", "bek", "zu", "tan", "fi",
    "mor", "ul", "xe", "pra", "lin", "cho", "wes", "dam",
];

fn word(rng: &mut ChaCha8Rng, tag: &str) -> String {
    let n = rng.random_range(2..=3);
    let mut w: String = (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
    w.push_str(tag);
    w
}

fn vocabulary(rng: &mut ChaCha8Rng, n: usize, tag: &str) -> Vec<String> {
    (0..n).map(|_| word(rng, tag)).collect()
}

fn sentence(rng: &mut ChaCha8Rng, topic: &[String], common: &[String], topic_share: f64) -> String {
    let n = rng.random_range(8..=14);
    let mut words: Vec<String> = (0..n)
        .map(|_| {
            let pool = if rng.random_bool(topic_share) { topic } else { common };
            pool.choose(rng).unwrap().clone()
        })
        .collect();
    let first = &mut words[0];
    *first = first[..1].to_uppercase() + &first[1..];
    words.join(" ") + "."
}

/// `n_docs` documents of `sentences_per_doc` sentences, indexed from 1.
pub fn corpus(n_docs: usize, sentences_per_doc: usize, seed: u64, segmenter: &Segmenter) -> Vec<ReferenceDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let common = vocabulary(&mut rng, 60, "");
    (1..=n_docs)
        .map(|i| {
            let topic = vocabulary(&mut rng, 40, &format!("t{i}"));
            let body = (0..sentences_per_doc)
                .map(|_| sentence(&mut rng, &topic, &common, 0.7))
                .collect::<Vec<_>>()
                .join(" ");
            let mut doc = ReferenceDoc::new(i as u32, format!("Synthetic study {i}"), body, segmenter);
            doc.id = DocId(format!("syn{i:04}"));
            doc
        })
        .collect()
}

/// One cited sentence of a synthetic chapter.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub cited: u32,
    /// True when the sentence was copied verbatim from the cited document.
    pub grounded: bool,
}

/// A chapter of `n_sentences` cited sentences: a `grounded_fraction` share is
/// copied from the cited document, the rest is unrelated text citing a
/// random document. Returns the Markdown text and per-sentence truth.
pub fn chapter(
    docs: &[ReferenceDoc],
    n_sentences: usize,
    grounded_fraction: f64,
    seed: u64,
) -> (String, Vec<GroundTruth>) {
    assert!(!docs.is_empty(), "chapter needs at least one document");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let distractors = vocabulary(&mut rng, 200, "x");
    let n_grounded = (n_sentences as f64 * grounded_fraction).round() as usize;
    let mut truth_flags: Vec<bool> = (0..n_sentences).map(|i| i < n_grounded).collect();
    rand::seq::SliceRandom::shuffle(truth_flags.as_mut_slice(), &mut rng);

    let mut paragraphs = Vec::new();
    let mut truth = Vec::new();
    for grounded in truth_flags {
        let doc = docs.choose(&mut rng).unwrap();
        let text = if grounded {
            doc.sentences().choose(&mut rng).unwrap().to_string()
        } else {
            sentence(&mut rng, &distractors, &distractors, 1.0)
        };
        let body = text.strip_suffix('.').unwrap_or(&text);
        paragraphs.push(format!("{body} {}.", format_mark(&[doc.idx])));
        truth.push(GroundTruth { cited: doc.idx, grounded });
    }
    (paragraphs.join(" "), truth)
}
