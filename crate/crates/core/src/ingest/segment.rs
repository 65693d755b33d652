//! Rule-based sentence segmentation.
//!
//! A sentence ends at a run of terminal punctuation (`.`, `!`, `?`, optionally
//! followed by closing quotes or brackets) that is followed by whitespace or the
//! end of the text. Full-width CJK terminals (`。`, `！`, `？`, `；`) end a
//! sentence unconditionally, since CJK text is not space-delimited. Paragraph
//! breaks and Markdown heading lines are also boundaries.
//!
//! A lone `.` is not a boundary when it closes a configured abbreviation
//! (`Eq.`, `et al.`, ...) or a numbered-list marker (`1.` at the start of a line).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// Default abbreviation list, one entry per line; `#` starts a comment.
pub const DEFAULT_ABBREVIATIONS: &str = include_str!("../../../../config/abbreviations.txt");

/// Byte range of one sentence inside a text, whitespace-trimmed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
}

impl SentenceSpan {
    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }
}

fn is_ascii_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_cjk_terminal(c: char) -> bool {
    matches!(c, '。' | '！' | '？' | '；')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '}' | '”' | '’' | '»' | '）' | '」' | '』')
}

#[derive(Debug, Clone)]
pub struct Segmenter {
    abbreviations: Vec<String>,
}

impl Default for Segmenter {
    fn default() -> Self {
        Self::from_list(DEFAULT_ABBREVIATIONS)
    }
}

impl Segmenter {
    /// Parses an abbreviation list (one per line, `#` comments, blank lines ignored).
    pub fn from_list(list: &str) -> Self {
        let abbreviations = list
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| if l.ends_with('.') { l.to_string() } else { format!("{l}.") })
            .collect();
        Self { abbreviations }
    }

    pub fn from_file(path: &Path) -> Result<Self, IngestError> {
        let list = std::fs::read_to_string(path).map_err(|e| IngestError::from_io(path, e))?;
        Ok(Self::from_list(&list))
    }

    pub fn abbreviations(&self) -> &[String] {
        &self.abbreviations
    }

    /// Splits `text` into sentence spans. Every non-whitespace character of
    /// `text` lies inside exactly one span.
    pub fn segment(&self, text: &str) -> Vec<SentenceSpan> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let byte_at = |k: usize| chars.get(k).map_or(text.len(), |&(b, _)| b);

        let mut spans = Vec::new();
        let mut start: Option<usize> = None;
        // Byte offset just past the last non-whitespace char of the open sentence.
        let mut last_end = 0usize;
        let mut k = 0usize;

        while k < chars.len() {
            let (b, c) = chars[k];

            if c.is_whitespace() {
                if c == '\n' {
                    if let Some(s) = start {
                        let next = next_line_start(&chars, k + 1);
                        let paragraph_break = matches!(next, Some((_, '\n')) | None);
                        let heading_line = text[s..].starts_with('#');
                        let next_heading = matches!(next, Some((_, '#')));
                        if paragraph_break || heading_line || next_heading {
                            spans.push(SentenceSpan { start: s, end: last_end });
                            start = None;
                        }
                    }
                }
                k += 1;
                continue;
            }

            let s = *start.get_or_insert(b);
            last_end = b + c.len_utf8();

            if is_cjk_terminal(c) {
                let mut j = k + 1;
                while j < chars.len() && (is_cjk_terminal(chars[j].1) || is_closer(chars[j].1)) {
                    j += 1;
                }
                let end = byte_at(j);
                spans.push(SentenceSpan { start: s, end });
                start = None;
                k = j;
                continue;
            }

            if is_ascii_terminal(c) {
                let mut j = k + 1;
                while j < chars.len() && is_ascii_terminal(chars[j].1) {
                    j += 1;
                }
                let run_len = j - k;
                while j < chars.len() && is_closer(chars[j].1) {
                    j += 1;
                }
                let followed_by_break = j == chars.len() || chars[j].1.is_whitespace();
                if followed_by_break {
                    let guarded = c == '.' && run_len == 1 && self.is_guarded(text, s, b);
                    if !guarded {
                        let end = byte_at(j);
                        spans.push(SentenceSpan { start: s, end });
                        start = None;
                        k = j;
                        continue;
                    }
                }
                last_end = byte_at(j);
                k = j;
                continue;
            }

            k += 1;
        }

        if let Some(s) = start {
            spans.push(SentenceSpan { start: s, end: last_end });
        }
        spans
    }

    /// Convenience wrapper returning the sentence strings.
    pub fn sentences<'a>(&self, text: &'a str) -> Vec<&'a str> {
        self.segment(text).iter().map(|s| s.slice(text)).collect()
    }

    /// `dot` is the byte offset of a single `.` inside the sentence starting at `sentence_start`.
    fn is_guarded(&self, text: &str, sentence_start: usize, dot: usize) -> bool {
        let head = &text[sentence_start..=dot];
        for abbr in &self.abbreviations {
            if let Some(prefix) = head.strip_suffix(abbr.as_str()) {
                let at_boundary = prefix
                    .chars()
                    .next_back()
                    .is_none_or(|p| !p.is_alphanumeric());
                if at_boundary {
                    return true;
                }
            }
        }
        // Numbered list marker: a short run of digits that opens the sentence or a line.
        let before = &head[..head.len() - 1];
        let token_start = before
            .rfind(|ch: char| !ch.is_ascii_digit())
            .map_or(0, |p| p + before[p..].chars().next().map_or(1, char::len_utf8));
        let token = &before[token_start..];
        if !token.is_empty() && token.len() <= 3 {
            let opens_line = token_start == 0 || before[..token_start].ends_with('\n');
            if opens_line {
                return true;
            }
        }
        false
    }
}

/// Skips spaces, tabs and carriage returns; returns the next char, if any.
fn next_line_start(chars: &[(usize, char)], from: usize) -> Option<(usize, char)> {
    chars[from..]
        .iter()
        .copied()
        .find(|&(_, c)| !matches!(c, ' ' | '\t' | '\r'))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(text: &str) -> Vec<&str> {
        Segmenter::default().sentences(text)
    }

    #[test]
    fn splits_on_each_terminal_mark() {
        assert_eq!(seg("A cat. A dog! Why?"), vec!["A cat.", "A dog!", "Why?"]);
    }

    #[test]
    fn empty_and_blank_text() {
        assert!(seg("").is_empty());
        assert!(seg("   \n\t ").is_empty());
    }

    #[test]
    fn abbreviation_is_not_a_boundary() {
        assert_eq!(seg("Eq. 3 holds. Done."), vec!["Eq. 3 holds.", "Done."]);
        assert_eq!(seg("Zhang et al. found it."), vec!["Zhang et al. found it."]);
    }

    #[test]
    fn abbreviation_needs_word_boundary() {
        // "Config." ends with "fig." only as a substring.
        assert_eq!(seg("Edit the Config. Then run."), vec!["Edit the Config.", "Then run."]);
    }

    #[test]
    fn decimals_do_not_split() {
        assert_eq!(seg("It was 3.14 m. Next."), vec!["It was 3.14 m.", "Next."]);
    }

    #[test]
    fn closers_stay_with_the_sentence() {
        assert_eq!(seg("(See above.) Then \"go!\" Ok"), vec!["(See above.)", "Then \"go!\"", "Ok"]);
    }

    #[test]
    fn cjk_terminals_split_without_spaces() {
        assert_eq!(seg("他来了。她走了！"), vec!["他来了。", "她走了！"]);
    }

    #[test]
    fn paragraph_breaks_and_headings_split() {
        assert_eq!(
            seg("# Title\nBody text here\n\nNext paragraph"),
            vec!["# Title", "Body text here", "Next paragraph"]
        );
    }

    #[test]
    fn list_markers_open_lines_only() {
        assert_eq!(seg("1. First step.\n2. Second step."), vec!["1. First step.", "2. Second step."]);
        // Mid-line digits followed by a period are an ordinary boundary.
        assert_eq!(seg("We ran 12. Then stopped."), vec!["We ran 12.", "Then stopped."]);
    }

    #[test]
    fn custom_list_without_trailing_dot() {
        let s = Segmenter::from_list("# comment\nFoo\n\n");
        assert_eq!(s.abbreviations(), &["Foo.".to_string()]);
        assert_eq!(s.sentences("See Foo. bar. Baz."), vec!["See Foo. bar.", "Baz."]);
    }
}
