//! Reference ingestion: reads Markdown or plain text (optionally produced by an
//! external PDF converter), segments it into sentences and cuts overlapping
//! sentence-window blocks for indexing.

mod chunk;
mod segment;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

pub use chunk::{chunk_blocks, window_ranges, Block};
pub use segment::{Segmenter, SentenceSpan, DEFAULT_ABBREVIATIONS};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("file not found: {0}")]
    NotFound(PathBuf),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("document {0} has no sentences")]
    EmptyDocument(String),
    #[error("PDF conversion failed ({status}): {stderr}")]
    Conversion { status: String, stderr: String },
    #[error("invalid input: {0}")]
    Validation(String),
}

impl IngestError {
    pub(crate) fn from_io(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            IngestError::NotFound(path.to_path_buf())
        } else {
            IngestError::Io { path: path.to_path_buf(), source }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocId(pub String);

impl DocId {
    pub fn random() -> Self {
        DocId(uuid::Uuid::new_v4().simple().to_string())
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A source document. `idx` is the 1-based citation index used in `[idx]` marks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDoc {
    pub id: DocId,
    pub idx: u32,
    pub title: String,
    pub body_markdown: String,
    pub sentence_spans: Vec<SentenceSpan>,
}

impl ReferenceDoc {
    pub fn new(idx: u32, title: impl Into<String>, body_markdown: String, segmenter: &Segmenter) -> Self {
        let sentence_spans = segmenter.segment(&body_markdown);
        Self {
            id: DocId::random(),
            idx,
            title: title.into(),
            body_markdown,
            sentence_spans,
        }
    }

    pub fn sentences(&self) -> Vec<&str> {
        self.sentence_spans.iter().map(|s| s.slice(&self.body_markdown)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentKind {
    Markdown,
    Text,
    PdfExternal,
}

impl DocumentKind {
    /// Guesses the kind from a file extension; unknown extensions are plain text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("md" | "markdown") => DocumentKind::Markdown,
            Some("pdf") => DocumentKind::PdfExternal,
            _ => DocumentKind::Text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub window: usize,
    pub overlap: usize,
    /// Converter command template with `{input}` and `{output}` placeholders.
    pub pdf_command: Option<String>,
    /// Abbreviation list file; the built-in list is used when unset.
    pub abbreviations: Option<PathBuf>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self { window: 3, overlap: 1, pdf_command: None, abbreviations: None }
    }
}

impl IngestConfig {
    pub fn segmenter(&self) -> Result<Segmenter, IngestError> {
        match &self.abbreviations {
            Some(path) => Segmenter::from_file(path),
            None => Ok(Segmenter::default()),
        }
    }
}

pub struct Ingestor {
    config: IngestConfig,
    segmenter: Segmenter,
}

impl Ingestor {
    pub fn new(config: IngestConfig) -> Result<Self, IngestError> {
        window_ranges(0, config.window, config.overlap)?;
        let segmenter = config.segmenter()?;
        Ok(Self { config, segmenter })
    }

    pub fn segmenter(&self) -> &Segmenter {
        &self.segmenter
    }

    pub fn config(&self) -> &IngestConfig {
        &self.config
    }

    /// Reads a file and builds a [`ReferenceDoc`] with citation index `idx`.
    pub fn ingest_document(&self, path: &Path, kind: DocumentKind, idx: u32) -> Result<ReferenceDoc, IngestError> {
        if !path.exists() {
            return Err(IngestError::NotFound(path.to_path_buf()));
        }
        let body = match kind {
            DocumentKind::Markdown | DocumentKind::Text => {
                std::fs::read_to_string(path).map_err(|e| IngestError::from_io(path, e))?
            }
            DocumentKind::PdfExternal => self.convert_pdf(path)?,
        };
        let title = match kind {
            DocumentKind::Text => None,
            _ => markdown_title(&body),
        }
        .unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "untitled".into())
        });
        Ok(ReferenceDoc::new(idx, title, body, &self.segmenter))
    }

    pub fn chunk(&self, doc: &ReferenceDoc) -> Result<Vec<Block>, IngestError> {
        chunk_blocks(doc, self.config.window, self.config.overlap)
    }

    fn convert_pdf(&self, input: &Path) -> Result<String, IngestError> {
        let template = self.config.pdf_command.as_deref().ok_or_else(|| {
            IngestError::Validation("no `ingest.pdf_command` configured for PDF input".into())
        })?;
        let out_dir = tempfile::tempdir().map_err(|e| IngestError::from_io(input, e))?;
        let output = out_dir.path().join("converted.md");
        let input_s = input.to_string_lossy();
        let output_s = output.to_string_lossy();
        // Placeholders are substituted after splitting so paths may contain spaces.
        let argv: Vec<String> = template
            .split_whitespace()
            .map(|arg| arg.replace("{input}", &input_s).replace("{output}", &output_s))
            .collect();
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| IngestError::Validation("empty `ingest.pdf_command`".into()))?;
        let result = Command::new(program).args(args).output().map_err(|e| IngestError::Conversion {
            status: "spawn failed".into(),
            stderr: e.to_string(),
        })?;
        if !result.status.success() {
            return Err(IngestError::Conversion {
                status: result.status.to_string(),
                stderr: String::from_utf8_lossy(&result.stderr).into_owned(),
            });
        }
        std::fs::read_to_string(&output).map_err(|e| IngestError::Conversion {
            status: result.status.to_string(),
            stderr: format!("converter produced no readable output: {e}"),
        })
    }
}

/// First ATX level-1 heading, if the document has one.
pub fn markdown_title(body: &str) -> Option<String> {
    body.lines()
        .map(str::trim)
        .find_map(|l| l.strip_prefix("# "))
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
}
