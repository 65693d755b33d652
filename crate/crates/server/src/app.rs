//! Pipeline operations shared by the CLI, the HTTP handlers and job workers.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use coauthor_core::compressor::{CompressedReport, Compressor, DocFailure};
use coauthor_core::config::Config;
use coauthor_core::generator::{cited_set, GenerationConfig, Generator, HeadTailKind, Provenance, SectionDraft};
use coauthor_core::ingest::{markdown_title, Block, DocumentKind, IngestError, Ingestor, ReferenceDoc};
use coauthor_core::linker::{LinkIndex, LinkSet, Verifier};
use coauthor_core::metrics::{self, CorrectionStats, EvalInputs, MetricReport};
use coauthor_core::prompts::PromptSet;
use coauthor_core::providers::{ChatProvider, Embedder};
use coauthor_core::store::{
    Chapter, ChapterId, ChapterRole, ChapterStatus, Outline, OutlineFormat, Project, ProjectId, Store,
};

use crate::error::AppError;

pub type Progress<'a> = &'a (dyn Fn(usize, usize) + Sync);

pub fn no_progress(_: usize, _: usize) {}

pub struct App {
    config: Config,
    store: Store,
    chat: Arc<dyn ChatProvider>,
    embedder: Embedder,
    prompts: PromptSet,
    ingestor: Ingestor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub id: String,
    pub idx: u32,
    pub title: String,
    pub sentences: usize,
    pub chars: usize,
}

impl From<&ReferenceDoc> for ReferenceSummary {
    fn from(d: &ReferenceDoc) -> Self {
        Self {
            id: d.id.0.clone(),
            idx: d.idx,
            title: d.title.clone(),
            sentences: d.sentence_spans.len(),
            chars: d.body_markdown.chars().count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSummary {
    pub documents: usize,
    pub blocks: usize,
    pub nlist: usize,
    pub nprobe: usize,
    pub model_tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressSummary {
    pub reports: usize,
    pub failures: Vec<DocFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub revision: usize,
    pub calls: usize,
    pub cited: usize,
    pub hallucinated: usize,
    pub uncited: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSummary {
    pub revision: usize,
    pub threshold: f64,
    pub sentences: usize,
    pub citations: usize,
    pub traceable: usize,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateParams {
    pub reference_text: String,
    /// Taken from the Markdown headings of `reference_text` when absent.
    #[serde(default)]
    pub reference_headings: Option<Vec<String>>,
    /// Latest revision when absent.
    #[serde(default)]
    pub revision: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateSummary {
    pub name: String,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftSummary {
    pub revision: usize,
    pub id: String,
    pub provenance: Provenance,
    pub words: usize,
    pub created_at: chrono::DateTime<chrono::Utc>,
}

/// Byte range of the body under the heading line for `path` in a stitched
/// chapter, i.e. everything up to the next heading line.
fn section_body_range(text: &str, path: &[String]) -> Option<(usize, usize)> {
    let mut current: Vec<String> = Vec::new();
    let mut start = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_end();
        let hashes = trimmed.chars().take_while(|&c| c == '#').count();
        if hashes > 0 && trimmed[hashes..].starts_with(' ') {
            if start.is_some() {
                return start.map(|s| (s, offset));
            }
            if hashes >= 2 {
                current.truncate(hashes - 2);
                current.push(trimmed[hashes..].trim().to_string());
                if current == path {
                    start = Some(offset + line.len());
                }
            }
        }
        offset += line.len();
    }
    start.map(|s| (s, text.len()))
}

/// Replaces one leaf section body of a stitched chapter.
pub fn splice_section(text: &str, path: &[String], body: &str) -> Option<String> {
    let (start, end) = section_body_range(text, path)?;
    let tail = if end == text.len() { "\n" } else { "\n\n" };
    Some(format!("{}\n{}{tail}{}", &text[..start], body.trim(), &text[end..]))
}

impl App {
    pub fn new(config: Config) -> Result<Self, AppError> {
        let chat: Arc<dyn ChatProvider> = Arc::new(config.providers.chat_client()?);
        let embedder = config.providers.embedder()?;
        Self::with_backends(config, chat, embedder)
    }

    /// Uses the given providers instead of the configured ones.
    pub fn with_backends(config: Config, chat: Arc<dyn ChatProvider>, embedder: Embedder) -> Result<Self, AppError> {
        config.validate()?;
        let store = Store::open(&config.store.root)?;
        let prompts = config.prompt_set()?;
        let ingestor = Ingestor::new(config.ingest.clone())?;
        Ok(Self { config, store, chat, embedder, prompts, ingestor })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn embedder(&self) -> &Embedder {
        &self.embedder
    }

    // Projects and chapters

    pub fn create_project(&self, title: &str) -> Result<Project, AppError> {
        Ok(self.store.create_project(title.trim())?)
    }

    pub fn create_chapter(
        &self,
        pid: &ProjectId,
        title: &str,
        role: ChapterRole,
        outline: &str,
        format: Option<OutlineFormat>,
    ) -> Result<Chapter, AppError> {
        let outline = self.parse_outline(role, outline, format)?;
        Ok(self.store.create_chapter(pid, title.trim(), role, outline)?)
    }

    fn parse_outline(&self, role: ChapterRole, text: &str, format: Option<OutlineFormat>) -> Result<Outline, AppError> {
        if text.trim().is_empty() && role != ChapterRole::Body {
            return Ok(Outline::default());
        }
        Ok(Outline::parse(text, format)?)
    }

    pub fn set_outline(
        &self,
        pid: &ProjectId,
        cid: &ChapterId,
        text: &str,
        format: Option<OutlineFormat>,
    ) -> Result<Chapter, AppError> {
        let role = self.store.load_chapter(pid, cid)?.role;
        self.store.set_outline(pid, cid, self.parse_outline(role, text, format)?)?;
        Ok(self.store.load_chapter(pid, cid)?)
    }

    /// Moves the chapter to `next` when the status rules allow it.
    fn advance(&self, pid: &ProjectId, cid: &ChapterId, next: ChapterStatus) -> Result<(), AppError> {
        self.store.update_chapter(pid, cid, |c| {
            if c.status.can_become(next) {
                c.status = next;
            }
            Ok(())
        })?;
        Ok(())
    }

    pub fn finalize(&self, pid: &ProjectId, cid: &ChapterId) -> Result<Chapter, AppError> {
        let chapter = self.store.load_chapter(pid, cid)?;
        if chapter.status < ChapterStatus::Generated {
            return Err(AppError::Validation("a chapter needs a draft before it can be finalized".into()));
        }
        self.store.set_status(pid, cid, ChapterStatus::Finalized)?;
        Ok(self.store.load_chapter(pid, cid)?)
    }

    // References

    fn next_idx(&self, pid: &ProjectId, cid: &ChapterId) -> Result<u32, AppError> {
        Ok(self.store.load_references(pid, cid)?.iter().map(|d| d.idx).max().unwrap_or(0) + 1)
    }

    fn store_reference(&self, pid: &ProjectId, cid: &ChapterId, doc: &ReferenceDoc) -> Result<(), AppError> {
        self.store.add_reference(pid, cid, doc)?;
        // New material invalidates earlier compression and generation.
        self.store.set_status(pid, cid, ChapterStatus::Parsed)?;
        Ok(())
    }

    pub fn add_reference_text(
        &self,
        pid: &ProjectId,
        cid: &ChapterId,
        title: Option<&str>,
        body: String,
    ) -> Result<ReferenceDoc, AppError> {
        if body.trim().is_empty() {
            return Err(IngestError::EmptyDocument(title.unwrap_or("upload").to_string()).into());
        }
        let idx = self.next_idx(pid, cid)?;
        let title = title
            .map(str::to_string)
            .filter(|t| !t.trim().is_empty())
            .or_else(|| markdown_title(&body))
            .unwrap_or_else(|| format!("Reference {idx}"));
        let doc = ReferenceDoc::new(idx, title, body, self.ingestor.segmenter());
        self.store_reference(pid, cid, &doc)?;
        Ok(doc)
    }

    /// Ingests files in order, numbering them after the existing references.
    pub fn add_reference_files(
        &self,
        pid: &ProjectId,
        cid: &ChapterId,
        paths: &[PathBuf],
        kind: Option<DocumentKind>,
    ) -> Result<Vec<ReferenceDoc>, AppError> {
        self.store.load_chapter(pid, cid)?;
        let mut out = Vec::new();
        for path in paths {
            let idx = self.next_idx(pid, cid)?;
            let kind = kind.unwrap_or_else(|| DocumentKind::from_path(path));
            let doc = self.ingestor.ingest_document(path, kind, idx)?;
            if doc.sentence_spans.is_empty() {
                return Err(IngestError::EmptyDocument(path.display().to_string()).into());
            }
            self.store_reference(pid, cid, &doc)?;
            out.push(doc);
        }
        Ok(out)
    }

    fn references(&self, pid: &ProjectId, cid: &ChapterId) -> Result<Vec<ReferenceDoc>, AppError> {
        let refs = self.store.load_references(pid, cid)?;
        if refs.is_empty() {
            return Err(AppError::Validation("the chapter has no references".into()));
        }
        Ok(refs)
    }

    // Index

    /// Chunks and embeds every reference, then writes the block index.
    pub fn build_index(&self, pid: &ProjectId, cid: &ChapterId, progress: Progress) -> Result<IndexSummary, AppError> {
        let refs = self.references(pid, cid)?;
        let index = self.build_index_for(pid, cid, &refs, progress)?;
        Ok(self.index_summary(&index, refs.len()))
    }

    fn index_summary(&self, index: &LinkIndex, documents: usize) -> IndexSummary {
        IndexSummary {
            documents,
            blocks: index.catalog().blocks.len(),
            nlist: index.ivf().nlist(),
            nprobe: index.ivf().default_nprobe(),
            model_tag: index.catalog().model_tag.clone(),
        }
    }

    fn build_index_for(
        &self,
        pid: &ProjectId,
        cid: &ChapterId,
        refs: &[ReferenceDoc],
        progress: Progress,
    ) -> Result<LinkIndex, AppError> {
        let profile = &self.config.providers.embedding.linking;
        let mut blocks: Vec<Block> = Vec::new();
        for (i, doc) in refs.iter().enumerate() {
            let chunks = match self.ingestor.chunk(doc) {
                Ok(c) => c,
                Err(IngestError::EmptyDocument(_)) => Vec::new(),
                Err(e) => return Err(e.into()),
            };
            // Embedding per document warms the cache the build reads from.
            self.embedder.embed_all(&chunks.iter().map(|b| b.text.as_str()).collect::<Vec<_>>(), profile)?;
            blocks.extend(chunks);
            if i + 1 < refs.len() {
                progress(i + 1, refs.len());
            }
        }
        let index = LinkIndex::build(blocks, &self.embedder, profile, &self.config.index)?;
        index.save(&self.store.index_dir(pid, cid))?;
        progress(refs.len(), refs.len());
        Ok(index)
    }

    /// The saved index, rebuilt when missing or built from other references
    /// or another embedding model.
    fn current_index(&self, pid: &ProjectId, cid: &ChapterId, refs: &[ReferenceDoc]) -> Result<LinkIndex, AppError> {
        let profile = &self.config.providers.embedding.linking;
        let dir = self.store.index_dir(pid, cid);
        if dir.join(coauthor_core::linker::BLOCKS_FILE).exists() {
            let index = LinkIndex::load(&dir)?;
            let indexed: BTreeSet<&str> = index.catalog().blocks.iter().map(|b| b.doc_id.0.as_str()).collect();
            let wanted: BTreeSet<&str> =
                refs.iter().filter(|d| !d.sentence_spans.is_empty()).map(|d| d.id.0.as_str()).collect();
            let cat = index.catalog();
            if indexed == wanted && cat.model_tag == profile.model_tag && cat.dim == profile.dim {
                return Ok(index);
            }
        }
        self.build_index_for(pid, cid, refs, &no_progress)
    }

    // Compression

    fn compressor(&self) -> Compressor {
        Compressor::new(
            self.chat.clone(),
            self.config.providers.chat.clone(),
            self.prompts.compression.clone(),
            self.config.compressor.clone(),
            self.ingestor.segmenter().clone(),
        )
    }

    pub fn compress(&self, pid: &ProjectId, cid: &ChapterId, progress: Progress) -> Result<CompressSummary, AppError> {
        let refs = self.references(pid, cid)?;
        let outcome = self.compressor().compress_corpus(&refs, progress)?;
        for r in &outcome.reports {
            self.store.put_report(pid, cid, r)?;
        }
        self.advance(pid, cid, ChapterStatus::Compressed)?;
        Ok(CompressSummary { reports: outcome.reports.len(), failures: outcome.failures })
    }

    pub fn reports(&self, pid: &ProjectId, cid: &ChapterId) -> Result<Vec<CompressedReport>, AppError> {
        Ok(self.store.load_reports(pid, cid)?)
    }

    // Generation

    fn generator(&self, config: GenerationConfig) -> Result<Generator, AppError> {
        Ok(Generator::new(
            self.chat.clone(),
            self.config.providers.chat.clone(),
            self.prompts.generation.clone(),
            config,
        )?)
    }

    /// Work units of a generate job: one per outline leaf, or one.
    pub fn generate_units(
        &self,
        pid: &ProjectId,
        cid: &ChapterId,
        heading_path: Option<&[String]>,
    ) -> Result<usize, AppError> {
        let chapter = self.store.load_chapter(pid, cid)?;
        match chapter.role {
            ChapterRole::Body => {
                self.references(pid, cid)?;
                if self.store.load_reports(pid, cid)?.is_empty() {
                    return Err(AppError::Validation("compress the references before generating".into()));
                }
                match heading_path {
                    Some(path) => {
                        if !chapter.outline.is_leaf_path(path) {
                            return Err(AppError::Validation(format!("{} is not an outline leaf", path.join(" > "))));
                        }
                        if chapter.draft_revisions.is_empty() {
                            return Err(AppError::Validation(
                                "generate the whole chapter before regenerating one section".into(),
                            ));
                        }
                        Ok(1)
                    }
                    None if chapter.outline.is_empty() => Err(AppError::Validation("the outline is empty".into())),
                    None => Ok(chapter.outline.leaf_paths().len()),
                }
            }
            _ => {
                if self.finished_chapters(&self.store.load_project(pid)?)?.is_empty() {
                    return Err(AppError::Validation("no body chapter has a draft yet".into()));
                }
                Ok(1)
            }
        }
    }

    /// Latest drafts of the project's body chapters, in project order.
    fn finished_chapters(&self, project: &Project) -> Result<Vec<(String, SectionDraft)>, AppError> {
        let mut out = Vec::new();
        for cid in &project.chapters {
            let c = self.store.load_chapter(&project.id, cid)?;
            if c.role != ChapterRole::Body {
                continue;
            }
            if let Some(rev) = c.draft_revisions.len().checked_sub(1) {
                out.push((c.title.clone(), self.store.load_draft(&project.id, cid, rev)?));
            }
        }
        Ok(out)
    }

    /// Generates the chapter (or one leaf section of it) and stores the result
    /// as a new revision.
    pub fn generate(
        &self,
        pid: &ProjectId,
        cid: &ChapterId,
        heading_path: Option<&[String]>,
        progress: Progress,
    ) -> Result<GenerateSummary, AppError> {
        self.generate_units(pid, cid, heading_path)?;
        let project = self.store.load_project(pid)?;
        let chapter = self.store.load_chapter(pid, cid)?;
        let generator = self.generator(self.config.generator.clone())?;
        let draft = match (chapter.role, heading_path) {
            (ChapterRole::Body, None) => {
                let reports = self.store.load_reports(pid, cid)?;
                generator.generate_chapter(cid, &project.title, &chapter.title, &chapter.outline, &reports, progress)?
            }
            (ChapterRole::Body, Some(path)) => {
                let reports = self.store.load_reports(pid, cid)?;
                let section = generator.generate_section(cid, &project.title, &chapter.outline, path, &reports)?;
                let latest = self.store.load_draft(pid, cid, chapter.draft_revisions.len() - 1)?;
                let text = splice_section(&latest.text_markdown, path, &section.text_markdown).ok_or_else(|| {
                    AppError::Validation(format!("section {} is missing from the latest draft", path.join(" > ")))
                })?;
                let mut draft =
                    SectionDraft::new(cid.clone(), latest.heading_path.clone(), text, Provenance::Final, latest.universe);
                draft.batch_trace = section.batch_trace;
                draft
                    .validation
                    .hallucinated
                    .extend(section.validation.hallucinated.into_iter().filter(|h| h.origin != "final"));
                progress(1, 1);
                draft
            }
            (role, _) => {
                let kind = if role == ChapterRole::Introduction { HeadTailKind::Introduction } else { HeadTailKind::Conclusion };
                let chapters = self.finished_chapters(&project)?;
                let draft = generator.generate_head_tail(cid, &project.title, &chapters, kind)?;
                progress(1, 1);
                draft
            }
        };
        let revision = self.store.append_draft_revision(pid, cid, &draft)?;
        self.advance(pid, cid, ChapterStatus::Generated)?;
        Ok(GenerateSummary {
            revision,
            calls: draft.batch_trace.len(),
            cited: cited_set(&draft.citations).len(),
            hallucinated: draft.validation.hallucinated.len(),
            uncited: draft.validation.uncited,
        })
    }

    // Drafts

    pub fn drafts(&self, pid: &ProjectId, cid: &ChapterId) -> Result<Vec<DraftSummary>, AppError> {
        let n = self.store.load_chapter(pid, cid)?.draft_revisions.len();
        (0..n)
            .map(|rev| {
                let d = self.store.load_draft(pid, cid, rev)?;
                Ok(DraftSummary {
                    revision: rev,
                    id: d.id,
                    provenance: d.provenance,
                    words: d.text_markdown.split_whitespace().count(),
                    created_at: d.created_at,
                })
            })
            .collect()
    }

    /// Revision `rev`, or the latest one.
    pub fn draft(&self, pid: &ProjectId, cid: &ChapterId, rev: Option<usize>) -> Result<(usize, SectionDraft), AppError> {
        let rev = match rev {
            Some(r) => r,
            None => self
                .store
                .latest_revision(pid, cid)?
                .ok_or_else(|| AppError::NotFound(format!("chapter {cid} has no draft")))?,
        };
        Ok((rev, self.store.load_draft(pid, cid, rev)?))
    }

    /// Stores `text` as a new edited revision.
    pub fn edit_draft(&self, pid: &ProjectId, cid: &ChapterId, text: String) -> Result<usize, AppError> {
        if text.trim().is_empty() {
            return Err(AppError::Validation("draft text is empty".into()));
        }
        let (_, latest) = self.draft(pid, cid, None)?;
        Ok(self.store.append_draft_revision(pid, cid, &latest.edited(text))?)
    }

    /// Correction rate of `text` against revision 0.
    pub fn correction(&self, pid: &ProjectId, cid: &ChapterId, text: &str) -> Result<CorrectionStats, AppError> {
        let (_, first) = self.draft(pid, cid, Some(0)).map_err(|e| match e {
            AppError::Store(coauthor_core::store::StoreError::NotFound { .. }) => {
                AppError::NotFound(format!("chapter {cid} has no draft"))
            }
            other => other,
        })?;
        Ok(metrics::correction_rate(
            &first.text_markdown,
            text,
            self.ingestor.segmenter(),
            self.config.metrics.normalization,
        )?)
    }

    // Linking

    pub fn link(
        &self,
        pid: &ProjectId,
        cid: &ChapterId,
        revision: Option<usize>,
        progress: Progress,
    ) -> Result<LinkSummary, AppError> {
        let refs = self.references(pid, cid)?;
        let (rev, draft) = self.draft(pid, cid, revision)?;
        let index = self.current_index(pid, cid, &refs)?;
        let verifier = Verifier {
            index: &index,
            embedder: &self.embedder,
            profile: &self.config.providers.embedding.linking,
            segmenter: self.ingestor.segmenter(),
            config: &self.config.linker,
        };
        let set = verifier.verify_draft(&draft, rev, &refs)?;
        self.store.put_links(pid, cid, &set)?;
        self.advance(pid, cid, ChapterStatus::Linked)?;
        progress(1, 1);
        Ok(LinkSummary {
            revision: rev,
            threshold: set.threshold,
            sentences: set.report.sentences,
            citations: set.report.citations,
            traceable: set.report.traceable,
            accuracy: set.report.accuracy,
        })
    }

    /// Stored links of `rev`, re-evaluated at `threshold` when given.
    pub fn links(&self, pid: &ProjectId, cid: &ChapterId, rev: usize, threshold: Option<f64>) -> Result<LinkSet, AppError> {
        let set = self.store.load_links(pid, cid, rev)?;
        Ok(match threshold {
            Some(t) if !t.is_finite() => return Err(AppError::Validation("threshold must be finite".into())),
            Some(t) => set.with_threshold(t, self.config.linker.require_cited_document),
            None => set,
        })
    }

    /// Nearest blocks for an arbitrary sentence.
    pub fn trace(
        &self,
        pid: &ProjectId,
        cid: &ChapterId,
        sentence: &str,
        k: usize,
    ) -> Result<Vec<coauthor_core::linker::LinkHit>, AppError> {
        let refs = self.references(pid, cid)?;
        let index = self.current_index(pid, cid, &refs)?;
        let hits = index.trace_sentence(sentence, &self.embedder, &self.config.providers.embedding.linking, k)?;
        Ok(hits
            .into_iter()
            .map(|h| coauthor_core::linker::LinkHit {
                idx: refs.iter().find(|d| d.id == h.key.doc_id).map(|d| d.idx),
                block_text: index.block(&h.key).map(|b| b.text.clone()).unwrap_or_default(),
                doc_id: h.key.doc_id,
                block_index: h.key.block_index,
                score: h.score,
            })
            .collect())
    }

    // Evaluation

    pub fn evaluate(&self, pid: &ProjectId, cid: &ChapterId, params: &EvaluateParams) -> Result<EvaluateSummary, AppError> {
        if params.reference_text.trim().is_empty() {
            return Err(AppError::Validation("reference text is empty".into()));
        }
        let (rev, draft) = self.draft(pid, cid, params.revision)?;
        let (_, first) = self.draft(pid, cid, Some(0))?;
        let reference_headings =
            params.reference_headings.clone().unwrap_or_else(|| metrics::markdown_headings(&params.reference_text));
        if reference_headings.is_empty() {
            return Err(AppError::Validation("the reference chapter has no headings".into()));
        }
        let citation_accuracy = match self.store.load_links(pid, cid, rev) {
            Ok(set) => set.report.accuracy,
            Err(coauthor_core::store::StoreError::NotFound { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        let inputs = EvalInputs {
            generated_headings: metrics::markdown_headings(&draft.text_markdown),
            generated_text: draft.text_markdown,
            reference_text: params.reference_text.clone(),
            reference_headings,
            initial_draft: Some(first.text_markdown),
            citation_accuracy,
            normalization: self.config.metrics.normalization,
        };
        let report = metrics::evaluate(
            &inputs,
            &self.embedder,
            &self.config.providers.embedding.heading_eval,
            self.ingestor.segmenter(),
        )?;
        let name = self.store.put_metric_report(pid, cid, &report)?;
        Ok(EvaluateSummary { name, report })
    }

    pub fn metric_reports(&self, pid: &ProjectId, cid: &ChapterId) -> Result<Vec<EvaluateSummary>, AppError> {
        self.store.load_chapter(pid, cid)?;
        Ok(self
            .store
            .list_metric_reports(pid, cid)?
            .into_iter()
            .map(|(name, report)| EvaluateSummary { name, report })
            .collect())
    }

    pub fn segmenter(&self) -> &coauthor_core::ingest::Segmenter {
        self.ingestor.segmenter()
    }
}

/// Reads a UTF-8 file, naming it in the error.
pub fn read_text(path: &Path) -> Result<String, AppError> {
    std::fs::read_to_string(path).map_err(|source| AppError::Io { path: path.to_path_buf(), source })
}
