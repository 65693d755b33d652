//! Hierarchical chapter outlines and their two text formats.
//!
//! Indented text: one heading per line, `level = leading spaces / 2 + 1`.
//! Tabs are rejected.
//!
//! Markdown: `#`-prefixed heading lines (`level` = number of `#`) or bullet
//! items (`-`, `*`, `+`) nested by two-space indentation.

use serde::{Deserialize, Serialize};

use super::StoreError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlineNode {
    pub heading: String,
    pub level: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<OutlineNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Outline {
    pub nodes: Vec<OutlineNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlineFormat {
    Indented,
    Markdown,
}

impl Outline {
    /// Builds the tree from `(level, heading)` lines in document order.
    pub fn from_levels(lines: &[(u32, String)]) -> Result<Self, StoreError> {
        let mut prev = 0;
        for (i, (level, heading)) in lines.iter().enumerate() {
            if heading.trim().is_empty() {
                return Err(StoreError::Validation(format!("outline line {}: empty heading", i + 1)));
            }
            if *level == 0 || *level > prev + 1 {
                return Err(StoreError::Validation(format!(
                    "outline line {}: level {level} after level {prev} (levels must start at 1 and grow by one)",
                    i + 1
                )));
            }
            prev = *level;
        }
        fn take(lines: &[(u32, String)], pos: &mut usize, level: u32) -> Vec<OutlineNode> {
            let mut out = Vec::new();
            while *pos < lines.len() && lines[*pos].0 == level {
                let heading = lines[*pos].1.trim().to_string();
                *pos += 1;
                let children = take(lines, pos, level + 1);
                out.push(OutlineNode { heading, level, children });
            }
            out
        }
        let mut pos = 0;
        Ok(Self { nodes: take(lines, &mut pos, 1) })
    }

    pub fn parse_indented(text: &str) -> Result<Self, StoreError> {
        let mut lines = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let indent = line.len() - line.trim_start().len();
            if line[..indent].contains('\t') {
                return Err(StoreError::Validation(format!("outline line {}: tabs are not allowed", i + 1)));
            }
            lines.push((indent as u32 / 2 + 1, line.trim().to_string()));
        }
        Self::from_levels(&lines)
    }

    pub fn parse_markdown(text: &str) -> Result<Self, StoreError> {
        let mut lines = Vec::new();
        let mut heading_depth = 0;
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim_start();
            if trimmed.is_empty() {
                continue;
            }
            let hashes = trimmed.chars().take_while(|&c| c == '#').count();
            if hashes > 0 && trimmed[hashes..].starts_with(' ') {
                heading_depth = hashes as u32;
                lines.push((heading_depth, trimmed[hashes..].trim().to_string()));
                continue;
            }
            let indent = &line[..line.len() - trimmed.len()];
            if indent.contains('\t') {
                return Err(StoreError::Validation(format!("outline line {}: tabs are not allowed", i + 1)));
            }
            match trimmed.strip_prefix(['-', '*', '+']).filter(|r| r.starts_with(' ')) {
                Some(item) => lines.push((heading_depth + indent.len() as u32 / 2 + 1, item.trim().to_string())),
                None => {
                    return Err(StoreError::Validation(format!(
                        "outline line {}: expected a `#` heading or a list item",
                        i + 1
                    )))
                }
            }
        }
        Self::from_levels(&lines)
    }

    /// Markdown when any line is a `#` heading or list item, otherwise indented text.
    pub fn detect_format(text: &str) -> OutlineFormat {
        let markdown = text.lines().map(str::trim_start).any(|l| {
            let hashes = l.chars().take_while(|&c| c == '#').count();
            (hashes > 0 && l[hashes..].starts_with(' ')) || l.starts_with("- ") || l.starts_with("* ") || l.starts_with("+ ")
        });
        if markdown { OutlineFormat::Markdown } else { OutlineFormat::Indented }
    }

    pub fn parse(text: &str, format: Option<OutlineFormat>) -> Result<Self, StoreError> {
        match format.unwrap_or_else(|| Self::detect_format(text)) {
            OutlineFormat::Indented => Self::parse_indented(text),
            OutlineFormat::Markdown => Self::parse_markdown(text),
        }
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        fn walk(nodes: &[OutlineNode], level: u32) -> Result<(), StoreError> {
            for n in nodes {
                if n.level != level {
                    return Err(StoreError::Validation(format!(
                        "outline node {:?} has level {}, expected {level}",
                        n.heading, n.level
                    )));
                }
                if n.heading.trim().is_empty() {
                    return Err(StoreError::Validation("outline heading is empty".into()));
                }
                walk(&n.children, level + 1)?;
            }
            Ok(())
        }
        walk(&self.nodes, 1)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(level, heading)` for every node in document order.
    pub fn flatten(&self) -> Vec<(u32, String)> {
        fn walk(nodes: &[OutlineNode], out: &mut Vec<(u32, String)>) {
            for n in nodes {
                out.push((n.level, n.heading.clone()));
                walk(&n.children, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.nodes, &mut out);
        out
    }

    pub fn headings(&self) -> Vec<String> {
        self.flatten().into_iter().map(|(_, h)| h).collect()
    }

    /// Root-to-leaf heading paths of every leaf, in document order.
    pub fn leaf_paths(&self) -> Vec<Vec<String>> {
        fn walk(nodes: &[OutlineNode], path: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
            for n in nodes {
                path.push(n.heading.clone());
                if n.children.is_empty() {
                    out.push(path.clone());
                } else {
                    walk(&n.children, path, out);
                }
                path.pop();
            }
        }
        let mut out = Vec::new();
        walk(&self.nodes, &mut Vec::new(), &mut out);
        out
    }

    pub fn is_leaf_path(&self, path: &[String]) -> bool {
        self.leaf_paths().iter().any(|p| p == path)
    }

    pub fn to_indented(&self) -> String {
        self.flatten()
            .into_iter()
            .map(|(level, h)| format!("{}{h}\n", "  ".repeat(level as usize - 1)))
            .collect()
    }
}
