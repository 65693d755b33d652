//! Prompt templates loaded from editable text files.
//!
//! A template file holds the system prompt, a line reading exactly
//! [`USER_SEPARATOR`], then the user-message template. Placeholders are
//! `{name}` and are substituted in a single pass, so substituted text is
//! never re-scanned for placeholders.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;

pub const USER_SEPARATOR: &str = "----- user -----";

/// Section markers used by the shipped user templates. Mock backends key on them.
pub const BOOK_MARKER: &str = "## Book";
pub const OUTLINE_MARKER: &str = "## Outline";
pub const HEADINGS_MARKER: &str = "## Section headings";
pub const REFERENCES_MARKER: &str = "## References";
pub const PAPER_MARKER: &str = "## Paper";
pub const SECTION_MARKERS: [&str; 5] = [BOOK_MARKER, OUTLINE_MARKER, HEADINGS_MARKER, REFERENCES_MARKER, PAPER_MARKER];

/// Heading prefix of each intermediate draft in a merge call's reference list.
pub const INTERMEDIATE_HEADING: &str = "### Intermediate draft";

/// Separator used when rendering heading paths.
pub const HEADING_PATH_SEPARATOR: &str = " > ";

const BUILTIN_COMPRESSION: &str = include_str!("../../../prompts/compression.txt");
const BUILTIN_GENERATION: &str = include_str!("../../../prompts/generation.txt");

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("cannot read prompt file {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("prompt file {0} has no `{USER_SEPARATOR}` line")]
    MissingSeparator(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub system: String,
    pub user: String,
}

fn placeholder() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z_]+)\}").unwrap())
}

/// Replaces each known `{name}` once; unknown placeholders are left as-is.
pub fn substitute(template: &str, vars: &HashMap<&str, String>) -> String {
    placeholder()
        .replace_all(template, |caps: &regex::Captures<'_>| {
            vars.get(&caps[1]).cloned().unwrap_or_else(|| caps[0].to_string())
        })
        .into_owned()
}

impl PromptTemplate {
    pub fn parse(name: &str, text: &str) -> Result<Self, PromptError> {
        let mut system = Vec::new();
        let mut user = Vec::new();
        let mut seen = false;
        for line in text.lines() {
            if !seen && line.trim_end() == USER_SEPARATOR {
                seen = true;
                continue;
            }
            if seen { user.push(line) } else { system.push(line) }
        }
        if !seen {
            return Err(PromptError::MissingSeparator(name.to_string()));
        }
        Ok(Self { system: system.join("\n").trim_end().to_string(), user: user.join("\n").trim().to_string() })
    }

    pub fn render(&self, vars: &HashMap<&str, String>) -> (String, String) {
        (substitute(&self.system, vars), substitute(&self.user, vars))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    pub compression: PromptTemplate,
    pub generation: PromptTemplate,
}

impl PromptSet {
    pub fn builtin() -> Self {
        Self {
            compression: PromptTemplate::parse("compression.txt", BUILTIN_COMPRESSION).expect("builtin prompt"),
            generation: PromptTemplate::parse("generation.txt", BUILTIN_GENERATION).expect("builtin prompt"),
        }
    }

    /// Loads `compression.txt` and `generation.txt` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let read = |name: &str| {
            let path = dir.join(name);
            let text = std::fs::read_to_string(&path).map_err(|e| PromptError::Io(path.clone(), e))?;
            PromptTemplate::parse(name, &text)
        };
        Ok(Self { compression: read("compression.txt")?, generation: read("generation.txt")? })
    }
}

/// Formats an integer with thousands separators (`4000` → `"4,000"`).
pub fn with_thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Text between `marker` (on its own line) and the next known section marker.
pub fn section<'a>(user_prompt: &'a str, marker: &str) -> Option<&'a str> {
    let mut offset = 0;
    let mut start = None;
    for line in user_prompt.split_inclusive('\n') {
        let trimmed = line.trim_end();
        if let Some(s) = start {
            if SECTION_MARKERS.contains(&trimmed) {
                return Some(user_prompt[s..offset].trim());
            }
        } else if trimmed == marker {
            start = Some(offset + line.len());
        }
        offset += line.len();
    }
    start.map(|s| user_prompt[s.min(user_prompt.len())..].trim())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_prompts_render_the_published_wording() {
        let p = PromptSet::builtin();
        let vars = HashMap::from([("target_words", with_thousands(4000)), ("document", "BODY".to_string())]);
        let (system, user) = p.compression.render(&vars);
        assert!(system.starts_with("Write a detailed research report in English"));
        assert!(system.contains("should be around 4,000 words"));
        assert!(system.ends_with("future directions!!!"));
        assert_eq!(user, "## Paper\n\nBODY");

        let vars = HashMap::from([("min_words", "8000".to_string())]);
        let (system, _) = p.generation.render(&vars);
        assert!(system.contains("aiming for a minimum of 8000 words."));
        assert!(system.contains(r#"Use the format "[idx]" or "[idx_1, idx_2, ...]" (e.g., [3] or [3, 49])."#));
    }

    #[test]
    fn substitution_is_single_pass() {
        let vars = HashMap::from([("document", "{outline}".to_string()), ("outline", "X".to_string())]);
        assert_eq!(substitute("{document} / {outline} / {other}", &vars), "{outline} / X / {other}");
    }

    #[test]
    fn thousands() {
        assert_eq!(with_thousands(0), "0");
        assert_eq!(with_thousands(999), "999");
        assert_eq!(with_thousands(4000), "4,000");
        assert_eq!(with_thousands(1234567), "1,234,567");
    }

    #[test]
    fn sections_are_delimited_by_markers() {
        let text = "## Book\n\nT\n\n## Section headings\n\nA > B\n\n## References\n\n1. x -- y\n## not a marker\nz";
        assert_eq!(section(text, BOOK_MARKER), Some("T"));
        assert_eq!(section(text, HEADINGS_MARKER), Some("A > B"));
        assert_eq!(section(text, REFERENCES_MARKER), Some("1. x -- y\n## not a marker\nz"));
        assert_eq!(section(text, PAPER_MARKER), None);
    }

    #[test]
    fn missing_separator_is_an_error() {
        assert!(PromptTemplate::parse("x", "no separator").is_err());
    }
}
