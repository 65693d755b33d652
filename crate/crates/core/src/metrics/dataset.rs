//! Loader for review-corpus records (one literature review with its
//! references per record), as JSON array or JSON Lines.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub title: String,
    pub article_id: String,
    #[serde(default, deserialize_with = "one_or_many")]
    pub subject: Vec<String>,
    #[serde(default)]
    pub r#abstract: String,
    #[serde(default)]
    pub content: String,
    #[serde(default)]
    pub reference: Vec<String>,
    #[serde(default)]
    pub reference_content: Vec<ReferenceContent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceContent {
    #[serde(deserialize_with = "one_or_many")]
    pub reference_num: Vec<u32>,
    #[serde(default)]
    pub reference_title: String,
    #[serde(default)]
    pub reference_abstract: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(d: D) -> Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

/// Parses a JSON array of records, or one record per non-empty line.
pub fn parse_records(text: &str) -> Result<Vec<ReviewRecord>, MetricsError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| MetricsError::Dataset(format!("record array: {e}")));
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| MetricsError::Dataset(format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn load_records(path: &Path) -> Result<Vec<ReviewRecord>, MetricsError> {
    let text = std::fs::read_to_string(path).map_err(|e| MetricsError::Dataset(format!("{}: {e}", path.display())))?;
    parse_records(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RECORD: &str = r#"{"title": "A formula for a quartic integral", "article_id": "review-0001",
        "subject": ["Classical Analysis and ODEs"], "abstract": "We discuss", "content": "1. Introduction ...",
        "reference": ["[1] B. Berndt.", "[2] G. Boros and V. Moll."],
        "reference_content": [{"reference_num": [2], "reference_title": "An integral hidden",
                               "reference_abstract": "We provide"},
                              {"reference_num": 1, "reference_title": "Notebooks"}]}"#;

    #[test]
    fn parses_array_and_lines() {
        let one = parse_records(&format!("[{RECORD}]")).unwrap();
        assert_eq!(one[0].subject, ["Classical Analysis and ODEs"]);
        assert_eq!(one[0].reference_content[0].reference_num, [2]);
        assert_eq!(one[0].reference_content[1].reference_num, [1]);
        let flat = RECORD.replace('\n', " ");
        let lines = parse_records(&format!("{flat}\n\n{flat}\n")).unwrap();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], one[0]);
    }

    #[test]
    fn bad_line_is_reported() {
        let err = parse_records("{\"title\": 1}").unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }
}
