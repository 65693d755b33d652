use std::sync::Arc;

use coauthor_core::ann::{BlockKey, SearchHit};
use coauthor_core::generator::{Provenance, SectionDraft};
use coauthor_core::ingest::{chunk_blocks, Block, ReferenceDoc, Segmenter};
use coauthor_core::linker::{IndexConfig, LinkIndex, LinkerConfig, LinkerError, Verifier};
use coauthor_core::providers::mock::{BowEmbedder, HashEmbedder};
use coauthor_core::providers::{Embedder, EmbeddingProfile, MemoryCache, Purpose, Reliability};
use coauthor_core::synthetic;

const DIM: usize = 512;

fn profile() -> EmbeddingProfile {
    EmbeddingProfile::new(Purpose::Linking, "bow", DIM)
}

fn embedder() -> Embedder {
    Embedder::new(Arc::new(BowEmbedder::new(DIM)), Arc::new(MemoryCache::default()), Reliability::unlimited(), 64)
}

fn blocks(docs: &[ReferenceDoc], window: usize, overlap: usize) -> Vec<Block> {
    docs.iter().flat_map(|d| chunk_blocks(d, window, overlap).unwrap()).collect()
}

fn draft(text: String, n: u32) -> SectionDraft {
    SectionDraft::new("chap".into(), vec!["Synthetic".into()], text, Provenance::Final, (1..=n).collect())
}

struct Fixture {
    docs: Vec<ReferenceDoc>,
    index: LinkIndex,
    embedder: Embedder,
    segmenter: Segmenter,
}

fn fixture(n_docs: usize, window: usize, overlap: usize) -> Fixture {
    let segmenter = Segmenter::default();
    let docs = synthetic::corpus(n_docs, 12, 11, &segmenter);
    let embedder = embedder();
    let index = LinkIndex::build(blocks(&docs, window, overlap), &embedder, &profile(), &IndexConfig::default()).unwrap();
    Fixture { docs, index, embedder, segmenter }
}

impl Fixture {
    fn verify(&self, text: String, config: &LinkerConfig) -> coauthor_core::linker::LinkSet {
        let p = profile();
        let v = Verifier { index: &self.index, embedder: &self.embedder, profile: &p, segmenter: &self.segmenter, config };
        v.verify_draft(&draft(text, self.docs.len() as u32), 0, &self.docs).unwrap()
    }
}

#[test]
fn verbatim_sentences_are_traceable() {
    let f = fixture(8, 1, 0);
    let mut text = Vec::new();
    for d in &f.docs {
        let s = d.sentences()[3];
        text.push(format!("{} [{}].", s.strip_suffix('.').unwrap(), d.idx));
    }
    for t in [0.0, 0.5, 0.9, 1.0 - 1e-6] {
        let set = f.verify(text.join(" "), &LinkerConfig { threshold: t, ..Default::default() });
        assert_eq!(set.report.citations, 8);
        assert_eq!(set.report.accuracy, Some(1.0), "threshold {t}");
        assert!(set.links.iter().all(|l| (l.hits[0].score - 1.0).abs() < 1e-6));
    }
}

#[test]
fn wrong_document_is_never_traceable() {
    let f = fixture(10, 3, 1);
    let n = f.docs.len() as u32;
    let text: Vec<String> = f
        .docs
        .iter()
        .map(|d| format!("{} [{}].", d.sentences()[0].strip_suffix('.').unwrap(), d.idx % n + 1))
        .collect();
    let set = f.verify(text.join(" "), &LinkerConfig::default());
    assert_eq!(set.report.citations, 10);
    assert_eq!(set.report.accuracy, Some(0.0));
    let lenient = f.verify(text.join(" "), &LinkerConfig { require_cited_document: false, ..Default::default() });
    assert_eq!(lenient.report.accuracy, Some(1.0));
}

#[test]
fn synthetic_chapter_accuracy_tracks_grounded_share() {
    let f = fixture(20, 3, 1);
    let (text, truth) = synthetic::chapter(&f.docs, 100, 0.7, 5);
    let set = f.verify(text, &LinkerConfig::default());
    let acc = set.report.accuracy.unwrap();
    eprintln!("synthetic 70/30 accuracy = {acc}");
    assert!((acc - 0.7).abs() <= 0.1, "accuracy {acc}");
    let cited: Vec<&coauthor_core::linker::CitationLink> = set.links.iter().filter(|l| l.cited.is_some()).collect();
    assert_eq!(cited.len(), truth.len());
    for (link, t) in cited.iter().zip(&truth) {
        assert_eq!(link.cited.as_deref(), Some(&[t.cited][..]));
        if !t.grounded {
            assert!(!link.traceable, "distractor traced: {}", link.sentence);
        }
    }
}

#[test]
fn traceable_count_is_monotone_in_threshold() {
    let f = fixture(20, 3, 1);
    let (text, _) = synthetic::chapter(&f.docs, 60, 0.7, 9);
    let mut previous = usize::MAX;
    for step in 0..10 {
        let t = step as f64 / 10.0;
        let set = f.verify(text.clone(), &LinkerConfig { threshold: t, ..Default::default() });
        assert!(set.report.traceable <= previous, "threshold {t}");
        assert!(set.report.traceable <= set.report.citations);
        previous = set.report.traceable;
    }
}

#[test]
fn group_marks_and_uncited_sentences() {
    let f = fixture(4, 3, 1);
    let s = f.docs[1].sentences()[2].strip_suffix('.').unwrap().to_string();
    let text = format!("{s} [1, 2]. Plain connective prose without any citation. {s} [3] [9].");
    let set = f.verify(text, &LinkerConfig::default());
    let marks: Vec<Option<Vec<u32>>> = set.links.iter().map(|l| l.cited.clone()).collect();
    assert_eq!(marks, [Some(vec![1, 2]), None, Some(vec![3]), Some(vec![9])]);
    let traceable: Vec<bool> = set.links.iter().map(|l| l.traceable).collect();
    assert_eq!(traceable, [true, false, false, false]);
    assert_eq!(set.report.citations, 3);
    assert_eq!(set.report.unknown_indices, [9]);
    assert!(set.links[0].hits.windows(2).all(|w| w[0].score >= w[1].score));
}

#[test]
fn zero_citations_give_null_accuracy() {
    let f = fixture(3, 3, 1);
    let set = f.verify("No marks here. None at all.".into(), &LinkerConfig::default());
    assert_eq!(set.report.citations, 0);
    assert_eq!(set.report.accuracy, None);
    assert_eq!(set.links.len(), 2);
    let json = serde_json::to_value(&set.report).unwrap();
    assert!(json["accuracy"].is_null());
}

#[test]
fn trace_sentence_finds_identical_block() {
    let f = fixture(5, 3, 1);
    let block = &f.index.catalog().blocks[7];
    let hits = f.index.trace_sentence(&block.text, &f.embedder, &profile(), 5).unwrap();
    assert_eq!(hits[0].key, BlockKey { doc_id: block.doc_id.clone(), block_index: block.block_index as u32 });
    assert!((hits[0].score - 1.0).abs() < 1e-6);
    assert!(matches!(f.index.trace_sentence("  [3] ", &f.embedder, &profile(), 5), Err(LinkerError::Validation(_))));
    let other = EmbeddingProfile::new(Purpose::Linking, "other", DIM);
    assert!(f.index.trace_sentence("text", &f.embedder, &other, 5).is_err());
}

#[test]
fn full_probe_matches_flat_oracle() {
    let keys: Vec<Block> = (0..200)
        .map(|i| Block {
            doc_id: coauthor_core::ingest::DocId(format!("d{}", i % 13)),
            block_index: i,
            sentence_indices: vec![i],
            text: format!("block {i}"),
        })
        .collect();
    let embedder =
        Embedder::new(Arc::new(HashEmbedder::new(32)), Arc::new(MemoryCache::default()), Reliability::unlimited(), 64);
    let p = EmbeddingProfile::new(Purpose::Linking, "hash", 32);
    let index = LinkIndex::build(keys, &embedder, &p, &IndexConfig { nlist: Some(14), ..Default::default() }).unwrap();
    let nlist = index.ivf().nlist();
    for q in 0..20 {
        let v = embedder.embed_one(&format!("probe {q}"), &p).unwrap();
        let got = index.search(&v.values, 5, Some(nlist)).unwrap();
        let truth: Vec<SearchHit> = index.flat().search(&v.values, 5).unwrap();
        assert_eq!(got, truth);
    }
}

#[test]
fn index_persists_and_reloads() {
    let f = fixture(4, 3, 1);
    let dir = tempfile::tempdir().unwrap();
    f.index.save(dir.path()).unwrap();
    let back = LinkIndex::load(dir.path()).unwrap();
    assert_eq!(back.catalog(), f.index.catalog());
    assert_eq!(back.ivf().to_bytes(), f.index.ivf().to_bytes());
    assert_eq!(back.flat().to_bytes(), f.index.flat().to_bytes());
    std::fs::write(dir.path().join("flat.bin"), b"CAFLAT32").unwrap();
    assert!(LinkIndex::load(dir.path()).is_err());
}

#[test]
fn rethresholding_matches_a_fresh_run() {
    let f = fixture(20, 3, 1);
    let (text, _) = synthetic::chapter(&f.docs, 60, 0.7, 13);
    let base = f.verify(text.clone(), &LinkerConfig::default());
    for t in [0.0, 0.3, 0.55, 0.8, 1.0] {
        let fresh = f.verify(text.clone(), &LinkerConfig { threshold: t, ..Default::default() });
        let again = base.with_threshold(t, true);
        assert_eq!(again.links, fresh.links, "threshold {t}");
        assert_eq!(again.report, fresh.report);
    }
}
