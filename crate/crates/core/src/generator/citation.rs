//! Inline citation marks: `[3]` or `[3, 49]`.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationMark {
    pub indices: Vec<u32>,
    /// Byte span of the whole mark, brackets included.
    pub start: usize,
    pub end: usize,
}

fn mark_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[(\d{1,9}(?:\s*,\s*\d{1,9})*)\]").unwrap())
}

fn indices(list: &str) -> Vec<u32> {
    list.split(',').filter_map(|s| s.trim().parse().ok()).collect()
}

pub fn parse_citations(text: &str) -> Vec<CitationMark> {
    mark_re()
        .captures_iter(text)
        .map(|c| {
            let m = c.get(0).unwrap();
            CitationMark { indices: indices(&c[1]), start: m.start(), end: m.end() }
        })
        .collect()
}

pub fn format_mark(indices: &[u32]) -> String {
    let inner: Vec<String> = indices.iter().map(u32::to_string).collect();
    format!("[{}]", inner.join(", "))
}

/// Rewrites every mark through `map`. Indices that map to `None` are moved
/// into separate `[?k]` marks right after the rewritten mark, so they no
/// longer parse as citations but stay visible. Returns the new text and the
/// unmapped indices in order of appearance.
pub fn rewrite_citations(text: &str, map: impl Fn(u32) -> Option<u32>) -> (String, Vec<u32>) {
    let mut unmapped = Vec::new();
    let out = mark_re().replace_all(text, |c: &Captures<'_>| {
        let mut kept = Vec::new();
        let mut lost = Vec::new();
        for i in indices(&c[1]) {
            match map(i) {
                Some(g) => kept.push(g),
                None => lost.push(i),
            }
        }
        let mut s = if kept.is_empty() { String::new() } else { format_mark(&kept) };
        for i in &lost {
            if !s.is_empty() {
                s.push(' ');
            }
            s.push_str(&format!("[?{i}]"));
        }
        unmapped.extend(lost);
        s
    });
    (out.into_owned(), unmapped)
}

/// Every index cited anywhere in `marks`.
pub fn cited_set(marks: &[CitationMark]) -> BTreeSet<u32> {
    marks.iter().flat_map(|m| m.indices.iter().copied()).collect()
}

/// Removes citation marks (and the space before them) from a sentence.
pub fn strip_citations(text: &str) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\s*\[\??\d{1,9}(?:\s*,\s*\??\d{1,9})*\]").unwrap());
    re.replace_all(text, "").trim().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_and_group_marks() {
        let text = "A [3]. B [3, 49]. C [x]. D [12,7].";
        let marks = parse_citations(text);
        assert_eq!(marks.len(), 3);
        assert_eq!(marks[0].indices, [3]);
        assert_eq!(&text[marks[1].start..marks[1].end], "[3, 49]");
        assert_eq!(marks[2].indices, [12, 7]);
    }

    #[test]
    fn rewrite_maps_and_flags() {
        let (s, lost) = rewrite_citations("A [1]. B [2, 9].", |i| (i <= 2).then_some(i + 100));
        assert_eq!(s, "A [101]. B [102] [?9].");
        assert_eq!(lost, [9]);
        assert!(parse_citations(&s).iter().all(|m| m.indices.iter().all(|&i| i > 100)));
    }

    #[test]
    fn strip_removes_marks() {
        assert_eq!(strip_citations("Granite fails early [1, 2] [?4]."), "Granite fails early.");
    }
}
