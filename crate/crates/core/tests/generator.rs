use std::sync::Arc;

use coauthor_core::compressor::{CompressedReport, Stage};
use coauthor_core::generator::{
    check_citation_coverage, cited_set, expected_calls, plan_batches, CallKind, GenerationConfig, Generator,
    Provenance, SectionDraft,
};
use coauthor_core::ingest::DocId;
use coauthor_core::prompts::{self, PromptSet, INTERMEDIATE_HEADING, REFERENCES_MARKER};
use coauthor_core::providers::mock::{template_reply, MockChat};
use coauthor_core::providers::ChatBackendConfig;
use coauthor_core::store::Outline;
use proptest::prelude::*;
use regex::Regex;

fn reports(n: u32) -> Vec<CompressedReport> {
    (1..=n)
        .map(|i| CompressedReport {
            doc_id: DocId(format!("doc{i}")),
            idx: i,
            title: format!("Paper {i}"),
            report_markdown: format!("# Report {i}\n\nStudy {i} measured strain rates. It also reported wave speeds."),
            word_count: 10,
            stage: Stage::SinglePass,
            parts: 1,
            requests: 1,
        })
        .collect()
}

fn generator(mock: Arc<MockChat>, limit: usize) -> Generator {
    let config = GenerationConfig { batch_limit: limit, ..Default::default() };
    Generator::new(mock, ChatBackendConfig::default(), PromptSet::builtin().generation, config).unwrap()
}

fn outline() -> Outline {
    Outline::parse_indented("Rock dynamics\n  Fracture\n  Waves\nMethods\n").unwrap()
}

fn path() -> Vec<String> {
    vec!["Rock dynamics".into(), "Fracture".into()]
}

fn section(mock: Arc<MockChat>, limit: usize, n: u32) -> SectionDraft {
    generator(mock, limit).generate_section(&"ch".into(), "AI for Rock Dynamics", &outline(), &path(), &reports(n)).unwrap()
}

/// Cites every listed entry by its number in the request and names its title,
/// so the final text shows which document each global citation points at.
fn pattern_mock() -> MockChat {
    let entry = Regex::new(r"(?m)^(\d+)\. (Paper \d+) -- ").unwrap();
    MockChat::scripted(move |req, _| {
        let refs = prompts::section(&req.user, REFERENCES_MARKER).unwrap_or_default();
        if refs.contains(INTERMEDIATE_HEADING) {
            return Ok(template_reply(&req.user));
        }
        let out: Vec<String> = entry.captures_iter(refs).map(|c| format!("Evidence from {} [{}].", &c[2], &c[1])).collect();
        Ok(out.join(" "))
    })
}

#[test]
fn call_counts_follow_the_batching_law() {
    for (n, expected) in [(1u32, 1usize), (40, 1), (41, 3), (100, 4), (910, 24)] {
        let mock = Arc::new(MockChat::template());
        let draft = section(mock.clone(), 40, n);
        assert_eq!(mock.calls(), expected, "n_refs = {n}");
        assert_eq!(expected_calls(n as usize, 40), expected);
        assert_eq!(draft.batch_trace.len(), expected);
        assert_eq!(cited_set(&draft.citations), (1..=n).collect(), "n_refs = {n}");
        assert!(draft.validation.is_clean());
    }
}

#[test]
fn intermediates_beyond_the_limit_merge_recursively() {
    let mock = Arc::new(MockChat::template());
    let draft = section(mock.clone(), 4, 50);
    assert_eq!(mock.calls(), 13 + 4 + 1);
    let levels: Vec<(usize, CallKind)> = draft.batch_trace.iter().map(|d| (d.level, d.kind)).collect();
    assert_eq!(levels.iter().filter(|l| **l == (0, CallKind::Intermediate)).count(), 13);
    assert_eq!(levels.iter().filter(|l| **l == (1, CallKind::Merge)).count(), 4);
    assert_eq!(levels.last(), Some(&(2, CallKind::Merge)));
    assert_eq!(cited_set(&draft.citations), (1..=50).collect());
}

#[test]
fn local_citations_are_remapped_to_their_documents() {
    let mock = Arc::new(pattern_mock());
    let draft = section(mock.clone(), 40, 100);
    assert_eq!(mock.calls(), 4);
    // Each intermediate request numbers its batch from 1.
    for req in mock.requests().iter().filter(|r| !r.user.contains(INTERMEDIATE_HEADING)) {
        assert!(req.user.contains("\n1. Paper "));
    }
    let claim = Regex::new(r"Evidence from Paper (\d+) \[(\d+)\]").unwrap();
    let pairs: Vec<(u32, u32)> =
        claim.captures_iter(&draft.text_markdown).map(|c| (c[1].parse().unwrap(), c[2].parse().unwrap())).collect();
    assert_eq!(pairs.len(), 100);
    assert!(pairs.iter().all(|(doc, cited)| doc == cited));
    let merge = mock.requests().into_iter().find(|r| r.user.contains(INTERMEDIATE_HEADING)).unwrap();
    assert!(merge.user.contains("### Intermediate draft 2 (references 41–80)"));
    assert!(merge.user.contains("Evidence from Paper 77 [77]."));
}

#[test]
fn out_of_range_local_citation_is_flagged() {
    let mock = Arc::new(MockChat::scripted(|req, _| {
        if req.user.contains(INTERMEDIATE_HEADING) {
            return Ok(template_reply(&req.user));
        }
        Ok("Alpha [1]. Beta [41].".to_string())
    }));
    let draft = section(mock, 40, 80);
    assert!(draft.text_markdown.contains("[?41]"));
    assert_eq!(draft.validation.hallucinated.len(), 2);
    assert!(draft.validation.hallucinated.iter().all(|h| h.index == 41 && h.origin.starts_with("intermediate")));
    assert_eq!(cited_set(&draft.citations), [1, 41].into_iter().collect());
}

#[test]
fn generation_is_deterministic() {
    let a = section(Arc::new(MockChat::template()), 40, 100);
    let b = section(Arc::new(MockChat::template()), 40, 100);
    assert_eq!(a.text_markdown, b.text_markdown);
    assert_eq!(a.citations, b.citations);
    assert_eq!(a.batch_trace, b.batch_trace);
    assert_eq!(a.validation, b.validation);
}

#[test]
fn coverage_examples() {
    let d = |text: &str| SectionDraft::new("c".into(), vec!["S".into()], text.into(), Provenance::Final, vec![1, 2, 3]);
    assert_eq!(check_citation_coverage(&d("A [1]. B [2]."), 3), [3]);
    assert!(check_citation_coverage(&d("A [1]. B [2, 3]."), 3).is_empty());
    assert_eq!(check_citation_coverage(&d("A [1, 3]."), 3), [2]);
}

#[test]
fn edited_revision_keeps_universe() {
    let first = section(Arc::new(MockChat::template()), 40, 5);
    let edited = first.edited("Revised claim [2]. Unknown [9].".into());
    assert_eq!(edited.provenance, Provenance::Edited);
    assert_eq!(edited.universe, first.universe);
    assert_eq!(edited.validation.uncited, [1, 3, 4, 5]);
    assert_eq!(edited.validation.hallucinated[0].index, 9);
    assert_ne!(edited.id, first.id);
}

#[test]
fn draft_round_trips_through_json() {
    let draft = section(Arc::new(MockChat::template()), 40, 41);
    let json = serde_json::to_string(&draft).unwrap();
    let back: SectionDraft = serde_json::from_str(&json).unwrap();
    assert_eq!(back, draft);
}

proptest! {
    #[test]
    fn batch_plan_invariants(n in 1usize..5000, limit in 1usize..100) {
        let sizes = plan_batches(n, limit).unwrap();
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        prop_assert!(sizes.iter().all(|&s| s >= 1 && s <= limit));
        prop_assert!(sizes.iter().filter(|&&s| s < limit).count() <= 1);
        prop_assert!(sizes[..sizes.len() - 1].iter().all(|&s| s == limit));
    }

    #[test]
    fn call_count_matches_a_simulated_merge_tree(n in 1u32..400, limit in 2usize..12) {
        let mock = Arc::new(MockChat::template());
        let draft = section(mock.clone(), limit, n);
        // Independent count: batches, then groups of `limit` until one remains.
        let mut calls = 0;
        let mut items = (n as usize).div_ceil(limit);
        calls += items;
        if items > 1 {
            while items > limit {
                items = items.div_ceil(limit);
                calls += items;
            }
            calls += 1;
        }
        prop_assert_eq!(mock.calls(), calls);
        prop_assert_eq!(draft.batch_trace.len(), calls);
        prop_assert_eq!(cited_set(&draft.citations), (1..=n).collect());
    }
}
