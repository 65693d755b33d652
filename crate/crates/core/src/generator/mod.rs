//! Section generation from compressed reports.
//!
//! At most `batch_limit` references go into one request. Larger reference
//! sets are generated batch by batch into intermediate drafts (each batch
//! numbered locally from 1), the local citations of every intermediate are
//! rewritten to the references' global indices, and the intermediates are
//! merged by one more request, recursively when there are more intermediates
//! than `batch_limit`.

mod citation;

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use citation::{cited_set, format_mark, parse_citations, rewrite_citations, strip_citations, CitationMark};

use crate::compressor::CompressedReport;
use crate::prompts::{self, PromptTemplate, HEADING_PATH_SEPARATOR, INTERMEDIATE_HEADING};
use crate::providers::{ChatBackendConfig, ChatProvider, ChatRequest, ProviderError};
use crate::store::{ChapterId, Outline};

#[derive(Debug, thiserror::Error)]
pub enum GeneratorError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("generation request failed: {0}")]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub batch_limit: usize,
    /// Word-count hint rendered into the prompt; never enforced.
    pub min_words_hint: usize,
    /// Concurrent batch requests.
    pub max_concurrency: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { batch_limit: 40, min_words_hint: 8000, max_concurrency: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Intermediate,
    Final,
    Edited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    /// All references fit in one request.
    Single,
    /// One batch of at most `batch_limit` references.
    Intermediate,
    /// Merge of intermediate drafts.
    Merge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchDescriptor {
    /// Order in which the request was planned (0-based, per section).
    pub call: usize,
    /// 0 for reference batches, then one more per merge level.
    pub level: usize,
    pub kind: CallKind,
    /// Heading path the request was made for, rendered with ` > `.
    pub section: String,
    /// Global reference indices whose material fed this request.
    pub references: Vec<u32>,
    /// Number of entries listed in the request.
    pub inputs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HallucinatedMark {
    pub index: u32,
    /// Where the mark was found: `"final"` or `"intermediate <n>"`.
    pub origin: String,
    pub section: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Out-of-range citation indices.
    pub hallucinated: Vec<HallucinatedMark>,
    /// References never cited.
    pub uncited: Vec<u32>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.hallucinated.is_empty() && self.uncited.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionDraft {
    pub id: String,
    pub chapter_id: ChapterId,
    pub heading_path: Vec<String>,
    pub text_markdown: String,
    pub citations: Vec<CitationMark>,
    pub provenance: Provenance,
    pub batch_trace: Vec<BatchDescriptor>,
    /// Valid citation indices for this draft.
    #[serde(default)]
    pub universe: Vec<u32>,
    #[serde(default)]
    pub validation: ValidationReport,
    pub created_at: DateTime<Utc>,
}

impl SectionDraft {
    fn assemble(
        chapter_id: ChapterId,
        heading_path: Vec<String>,
        text: String,
        provenance: Provenance,
        batch_trace: Vec<BatchDescriptor>,
        universe: Vec<u32>,
        mut hallucinated: Vec<HallucinatedMark>,
    ) -> Self {
        let citations = parse_citations(&text);
        let allowed: BTreeSet<u32> = universe.iter().copied().collect();
        let section = heading_path.join(HEADING_PATH_SEPARATOR);
        for m in &citations {
            for &i in &m.indices {
                if !allowed.contains(&i) {
                    hallucinated.push(HallucinatedMark { index: i, origin: "final".into(), section: section.clone() });
                }
            }
        }
        let cited = cited_set(&citations);
        let uncited = universe.iter().copied().filter(|i| !cited.contains(i)).collect();
        Self {
            id: uuid::Uuid::new_v4().simple().to_string(),
            chapter_id,
            heading_path,
            text_markdown: text,
            citations,
            provenance,
            batch_trace,
            universe,
            validation: ValidationReport { hallucinated, uncited },
            created_at: Utc::now(),
        }
    }

    /// A draft for `text` with no generation trace.
    pub fn new(
        chapter_id: ChapterId,
        heading_path: Vec<String>,
        text: String,
        provenance: Provenance,
        universe: Vec<u32>,
    ) -> Self {
        Self::assemble(chapter_id, heading_path, text, provenance, Vec::new(), universe, Vec::new())
    }

    /// A new revision carrying expert-edited text.
    pub fn edited(&self, text: String) -> Self {
        Self::assemble(
            self.chapter_id.clone(),
            self.heading_path.clone(),
            text,
            Provenance::Edited,
            Vec::new(),
            self.universe.clone(),
            Vec::new(),
        )
    }
}

/// Greedy batch sizes: full batches of `limit`, then the remainder.
pub fn plan_batches(n_refs: usize, limit: usize) -> Result<Vec<usize>, GeneratorError> {
    if n_refs == 0 {
        return Err(GeneratorError::Validation("no references to generate from".into()));
    }
    if limit == 0 {
        return Err(GeneratorError::Validation("batch limit must be at least 1".into()));
    }
    let mut sizes = vec![limit; n_refs / limit];
    if !n_refs.is_multiple_of(limit) {
        sizes.push(n_refs % limit);
    }
    Ok(sizes)
}

/// Provider requests needed for `n_refs` references under `limit`.
pub fn expected_calls(n_refs: usize, limit: usize) -> usize {
    let batches = n_refs.div_ceil(limit);
    if batches <= 1 {
        return 1;
    }
    let mut calls = batches;
    let mut items = batches;
    while items > limit {
        items = items.div_ceil(limit);
        calls += items;
    }
    calls + 1
}

/// Sorted reference indices never cited by `draft`, out of `1..=n_refs`.
pub fn check_citation_coverage(draft: &SectionDraft, n_refs: u32) -> Vec<u32> {
    let cited = cited_set(&draft.citations);
    (1..=n_refs).filter(|i| !cited.contains(i)).collect()
}

/// One entry of a generation request: its number in the list, a title and
/// the material itself.
#[derive(Debug, Clone)]
struct Item {
    /// Global references covered (one for a document, many for an intermediate).
    covers: Vec<u32>,
    title: String,
    text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadTailKind {
    Introduction,
    Conclusion,
}

impl HeadTailKind {
    pub fn heading(self) -> &'static str {
        match self {
            HeadTailKind::Introduction => "Introduction",
            HeadTailKind::Conclusion => "Conclusion",
        }
    }
}

pub struct Generator {
    chat: Arc<dyn ChatProvider>,
    settings: ChatBackendConfig,
    prompt: PromptTemplate,
    config: GenerationConfig,
}

struct Ctx<'a> {
    book_title: &'a str,
    outline: String,
    section: String,
    trace: Mutex<Vec<BatchDescriptor>>,
    calls: AtomicUsize,
}

impl Ctx<'_> {
    fn record(&self, level: usize, kind: CallKind, items: &[Item]) -> usize {
        let call = self.calls.fetch_add(1, Ordering::SeqCst);
        let references = items.iter().flat_map(|i| i.covers.iter().copied()).collect::<BTreeSet<_>>();
        self.trace.lock().unwrap().push(BatchDescriptor {
            call,
            level,
            kind,
            section: self.section.clone(),
            references: references.into_iter().collect(),
            inputs: items.len(),
        });
        call
    }
}

impl Generator {
    pub fn new(
        chat: Arc<dyn ChatProvider>,
        settings: ChatBackendConfig,
        prompt: PromptTemplate,
        config: GenerationConfig,
    ) -> Result<Self, GeneratorError> {
        if config.batch_limit == 0 {
            return Err(GeneratorError::Validation("batch limit must be at least 1".into()));
        }
        Ok(Self { chat, settings, prompt, config })
    }

    pub fn config(&self) -> &GenerationConfig {
        &self.config
    }

    fn request(&self, ctx: &Ctx<'_>, references: String) -> ChatRequest {
        let vars = HashMap::from([
            ("book_title", ctx.book_title.to_string()),
            ("outline", ctx.outline.clone()),
            ("heading_path", ctx.section.clone()),
            ("references", references),
            ("min_words", self.config.min_words_hint.to_string()),
        ]);
        let (system, user) = self.prompt.render(&vars);
        ChatRequest {
            system,
            user,
            model_tag: self.settings.model.clone(),
            max_tokens: self.settings.max_tokens,
            temperature: self.settings.temperature,
        }
    }

    fn call(&self, ctx: &Ctx<'_>, references: String) -> Result<String, GeneratorError> {
        Ok(self.chat.chat(&self.request(ctx, references))?.text)
    }

    /// Entries numbered `number(k)`, rendered as `n. title -- text`.
    fn render_entries(items: &[Item], number: impl Fn(usize, &Item) -> u32) -> String {
        items
            .iter()
            .enumerate()
            .map(|(k, it)| format!("{}. {} -- {}", number(k, it), it.title, it.text.trim()))
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    fn render_intermediates(items: &[Item]) -> String {
        let mut out = String::from(
            "The intermediate drafts below already cite the original references by their global index. \
             Merge them into one section and keep those citations.",
        );
        for (k, it) in items.iter().enumerate() {
            out.push_str(&format!("\n\n{INTERMEDIATE_HEADING} {} ({})\n{}", k + 1, it.title, it.text.trim()));
        }
        out
    }

    /// Runs `f` over `jobs` with bounded concurrency, keeping input order.
    fn run_bounded<T: Sync, R: Send>(
        &self,
        jobs: &[T],
        f: impl Fn(usize, &T) -> Result<R, GeneratorError> + Sync,
    ) -> Result<Vec<R>, GeneratorError> {
        let slots: Vec<Mutex<Option<Result<R, GeneratorError>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..self.config.max_concurrency.clamp(1, jobs.len().max(1)) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(job) = jobs.get(i) else { break };
                    *slots[i].lock().unwrap() = Some(f(i, job));
                });
            }
        });
        slots.into_iter().map(|s| s.into_inner().unwrap().expect("every job ran")).collect()
    }

    /// Generates from `items`, whose citations use the indices in `covers`.
    fn generate_items(
        &self,
        ctx: &Ctx<'_>,
        items: Vec<Item>,
        hallucinated: &Mutex<Vec<HallucinatedMark>>,
    ) -> Result<String, GeneratorError> {
        let limit = self.config.batch_limit;
        if items.len() <= limit {
            ctx.record(0, CallKind::Single, &items);
            return self.call(ctx, Self::render_entries(&items, |_, it| it.covers[0]));
        }

        // Reference batches, numbered locally and rewritten to global indices.
        let sizes = plan_batches(items.len(), limit)?;
        let mut batches = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for size in sizes {
            batches.push(items[start..start + size].to_vec());
            start += size;
        }
        let calls: Vec<usize> = batches.iter().map(|b| ctx.record(0, CallKind::Intermediate, b)).collect();
        let intermediates = self.run_bounded(&batches, |b, batch| {
            let text = self.call(ctx, Self::render_entries(batch, |k, _| k as u32 + 1))?;
            let (rewritten, lost) =
                rewrite_citations(&text, |local| batch.get((local as usize).checked_sub(1)?).map(|it| it.covers[0]));
            let mut h = hallucinated.lock().unwrap();
            for index in lost {
                h.push(HallucinatedMark {
                    index,
                    origin: format!("intermediate {}", calls[b] + 1),
                    section: ctx.section.clone(),
                });
            }
            let covers: Vec<u32> = batch.iter().map(|it| it.covers[0]).collect();
            let title = format!(
                "references {}–{}",
                covers.iter().min().unwrap(),
                covers.iter().max().unwrap()
            );
            Ok(Item { covers, title, text: rewritten })
        })?;
        self.merge(ctx, intermediates, 1)
    }

    fn merge(&self, ctx: &Ctx<'_>, items: Vec<Item>, level: usize) -> Result<String, GeneratorError> {
        let limit = self.config.batch_limit;
        if items.len() <= limit {
            ctx.record(level, CallKind::Merge, &items);
            return self.call(ctx, Self::render_intermediates(&items));
        }
        let groups: Vec<Vec<Item>> = items.chunks(limit).map(<[Item]>::to_vec).collect();
        for g in &groups {
            ctx.record(level, CallKind::Merge, g);
        }
        let merged = self.run_bounded(&groups, |_, group| {
            let text = self.call(ctx, Self::render_intermediates(group))?;
            let covers: Vec<u32> = group.iter().flat_map(|it| it.covers.iter().copied()).collect();
            let title = format!("references {}–{}", covers.iter().min().unwrap(), covers.iter().max().unwrap());
            Ok(Item { covers, title, text })
        })?;
        self.merge(ctx, merged, level + 1)
    }

    fn generate(
        &self,
        chapter_id: &ChapterId,
        book_title: &str,
        outline_text: String,
        heading_path: Vec<String>,
        items: Vec<Item>,
    ) -> Result<SectionDraft, GeneratorError> {
        if items.is_empty() {
            return Err(GeneratorError::Validation("no references to generate from".into()));
        }
        let universe: Vec<u32> = items.iter().map(|i| i.covers[0]).collect();
        let distinct: BTreeSet<u32> = universe.iter().copied().collect();
        if distinct.len() != universe.len() || distinct.contains(&0) {
            return Err(GeneratorError::Validation("reference indices must be distinct and at least 1".into()));
        }
        let ctx = Ctx {
            book_title,
            outline: outline_text,
            section: heading_path.join(HEADING_PATH_SEPARATOR),
            trace: Mutex::default(),
            calls: AtomicUsize::new(0),
        };
        let hallucinated = Mutex::default();
        let text = self.generate_items(&ctx, items, &hallucinated)?;
        let mut trace = ctx.trace.into_inner().unwrap();
        trace.sort_by_key(|d| d.call);
        Ok(SectionDraft::assemble(
            chapter_id.clone(),
            heading_path,
            text.trim().to_string(),
            Provenance::Final,
            trace,
            universe.into_iter().collect::<BTreeSet<_>>().into_iter().collect(),
            hallucinated.into_inner().unwrap(),
        ))
    }

    /// Generates the body of one leaf section from `reports`.
    pub fn generate_section(
        &self,
        chapter_id: &ChapterId,
        book_title: &str,
        outline: &Outline,
        heading_path: &[String],
        reports: &[CompressedReport],
    ) -> Result<SectionDraft, GeneratorError> {
        if heading_path.is_empty() {
            return Err(GeneratorError::Validation("heading path is empty".into()));
        }
        if !outline.is_leaf_path(heading_path) {
            return Err(GeneratorError::Validation(format!(
                "{} is not a leaf of the outline",
                heading_path.join(HEADING_PATH_SEPARATOR)
            )));
        }
        let mut sorted: Vec<&CompressedReport> = reports.iter().collect();
        sorted.sort_by_key(|r| r.idx);
        let items = sorted
            .into_iter()
            .map(|r| Item { covers: vec![r.idx], title: r.title.clone(), text: r.report_markdown.clone() })
            .collect();
        self.generate(chapter_id, book_title, outline.to_indented(), heading_path.to_vec(), items)
    }

    /// Generates every leaf section of `outline` and stitches them under
    /// Markdown headings (`#` for the chapter title, one more `#` per level).
    pub fn generate_chapter(
        &self,
        chapter_id: &ChapterId,
        book_title: &str,
        chapter_title: &str,
        outline: &Outline,
        reports: &[CompressedReport],
        progress: &(dyn Fn(usize, usize) + Sync),
    ) -> Result<SectionDraft, GeneratorError> {
        let leaves = outline.leaf_paths();
        if leaves.is_empty() {
            return Err(GeneratorError::Validation("outline has no sections".into()));
        }
        let mut bodies: HashMap<Vec<String>, SectionDraft> = HashMap::new();
        for (i, path) in leaves.iter().enumerate() {
            bodies.insert(path.clone(), self.generate_section(chapter_id, book_title, outline, path, reports)?);
            progress(i + 1, leaves.len());
        }

        let mut text = format!("# {chapter_title}\n");
        let mut trace = Vec::new();
        let mut hallucinated = Vec::new();
        let mut path: Vec<String> = Vec::new();
        for (level, heading) in outline.flatten() {
            path.truncate(level as usize - 1);
            path.push(heading.clone());
            text.push_str(&format!("\n{} {heading}\n", "#".repeat(level as usize + 1)));
            if let Some(section) = bodies.get(&path) {
                text.push_str(&format!("\n{}\n", section.text_markdown));
                let offset = trace.len();
                trace.extend(section.batch_trace.iter().cloned().map(|mut d| {
                    d.call += offset;
                    d
                }));
                hallucinated.extend(section.validation.hallucinated.iter().filter(|h| h.origin != "final").cloned());
            }
        }
        let mut universe: Vec<u32> = reports.iter().map(|r| r.idx).collect();
        universe.sort_unstable();
        Ok(SectionDraft::assemble(
            chapter_id.clone(),
            vec![chapter_title.to_string()],
            text,
            Provenance::Final,
            trace,
            universe,
            hallucinated,
        ))
    }

    /// Introduction or conclusion generated from finished chapters, which are
    /// cited by their position `1..=chapters.len()`.
    pub fn generate_head_tail(
        &self,
        chapter_id: &ChapterId,
        book_title: &str,
        chapters: &[(String, SectionDraft)],
        kind: HeadTailKind,
    ) -> Result<SectionDraft, GeneratorError> {
        if chapters.is_empty() {
            return Err(GeneratorError::Validation("no chapter drafts to build on".into()));
        }
        let heading = kind.heading().to_string();
        let mut outline_text = format!("{heading}\n");
        for (title, _) in chapters {
            outline_text.push_str(&format!("{title}\n"));
        }
        let items = chapters
            .iter()
            .enumerate()
            .map(|(k, (title, draft))| Item {
                covers: vec![k as u32 + 1],
                title: title.clone(),
                text: draft.text_markdown.clone(),
            })
            .collect();
        self.generate(chapter_id, book_title, outline_text, vec![heading], items)
    }
}

/// Renders `references` the way generation requests list them.
pub fn render_reference_entries(reports: &[CompressedReport]) -> String {
    Generator::render_entries(
        &reports
            .iter()
            .map(|r| Item { covers: vec![r.idx], title: r.title.clone(), text: r.report_markdown.clone() })
            .collect::<Vec<_>>(),
        |_, it| it.covers[0],
    )
}

/// Heading path joined with ` > `.
pub fn render_heading_path(path: &[String]) -> String {
    path.join(prompts::HEADING_PATH_SEPARATOR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compressor::Stage;
    use crate::ingest::DocId;
    use crate::prompts::PromptSet;
    use crate::providers::mock::MockChat;

    fn reports(n: u32) -> Vec<CompressedReport> {
        (1..=n)
            .map(|i| CompressedReport {
                doc_id: DocId(format!("d{i}")),
                idx: i,
                title: format!("Paper {i}"),
                report_markdown: format!("Finding number {i} holds. Extra detail {i}."),
                word_count: 6,
                stage: Stage::SinglePass,
                parts: 1,
                requests: 1,
            })
            .collect()
    }

    fn generator(mock: Arc<MockChat>, limit: usize) -> Generator {
        let cfg = GenerationConfig { batch_limit: limit, ..Default::default() };
        Generator::new(mock, ChatBackendConfig::default(), PromptSet::builtin().generation, cfg).unwrap()
    }

    fn outline() -> Outline {
        Outline::parse_indented("Dynamics\n  Fracture\n  Waves\n").unwrap()
    }

    fn path() -> Vec<String> {
        vec!["Dynamics".into(), "Fracture".into()]
    }

    #[test]
    fn batch_plans() {
        assert_eq!(plan_batches(100, 40).unwrap(), [40, 40, 20]);
        assert_eq!(plan_batches(40, 40).unwrap(), [40]);
        assert_eq!(plan_batches(1, 40).unwrap(), [1]);
        assert!(plan_batches(0, 40).is_err());
        assert_eq!(expected_calls(910, 40), 24);
        assert_eq!(expected_calls(41, 40), 3);
        assert_eq!(expected_calls(40, 40), 1);
        assert_eq!(expected_calls(2000, 40), 50 + 2 + 1);
    }

    #[test]
    fn small_reference_set_is_one_call() {
        let mock = Arc::new(MockChat::template());
        let d = generator(mock.clone(), 40).generate_section(&"c".into(), "Book", &outline(), &path(), &reports(5)).unwrap();
        assert_eq!(mock.calls(), 1);
        assert_eq!(d.batch_trace.len(), 1);
        assert!(d.text_markdown.contains("Fracture"));
        assert_eq!(cited_set(&d.citations), (1..=5).collect());
        assert!(d.validation.is_clean());
        let req = &mock.requests()[0];
        assert!(req.user.contains("Dynamics > Fracture"));
        assert!(req.user.contains("3. Paper 3 -- Finding number 3 holds."));
    }

    #[test]
    fn hundred_references_take_three_batches_and_a_merge() {
        let mock = Arc::new(MockChat::template());
        let d = generator(mock.clone(), 40).generate_section(&"c".into(), "B", &outline(), &path(), &reports(100)).unwrap();
        assert_eq!(mock.calls(), 4);
        let kinds: Vec<CallKind> = d.batch_trace.iter().map(|b| b.kind).collect();
        assert_eq!(kinds, [CallKind::Intermediate, CallKind::Intermediate, CallKind::Intermediate, CallKind::Merge]);
        assert_eq!(cited_set(&d.citations), (1..=100).collect());
        assert!(d.validation.is_clean());
    }

    #[test]
    fn out_of_range_marks_are_flagged() {
        let mock = Arc::new(MockChat::fixed("Claim [150]. Other [2]."));
        let d = generator(mock, 200).generate_section(&"c".into(), "B", &outline(), &path(), &reports(100)).unwrap();
        assert_eq!(d.validation.hallucinated.len(), 1);
        assert_eq!(d.validation.hallucinated[0].index, 150);
        assert!(d.text_markdown.contains("[150]"));
        assert_eq!(check_citation_coverage(&d, 3), [1, 3]);
    }

    #[test]
    fn heading_path_must_be_a_leaf() {
        let g = generator(Arc::new(MockChat::template()), 40);
        let err = g.generate_section(&"c".into(), "B", &outline(), &["Dynamics".to_string()], &reports(2));
        assert!(matches!(err, Err(GeneratorError::Validation(_))));
        assert!(g.generate_section(&"c".into(), "B", &outline(), &path(), &[]).is_err());
    }

    #[test]
    fn head_tail_cites_chapters() {
        let mock = Arc::new(MockChat::template());
        let g = generator(mock.clone(), 40);
        let chapter = g.generate_section(&"c".into(), "B", &outline(), &path(), &reports(2)).unwrap();
        let chapters: Vec<(String, SectionDraft)> = (1..=7).map(|i| (format!("Chapter {i}"), chapter.clone())).collect();
        let intro = g.generate_head_tail(&"i".into(), "B", &chapters, HeadTailKind::Introduction).unwrap();
        assert_eq!(intro.universe, (1..=7).collect::<Vec<_>>());
        assert_eq!(intro.heading_path, ["Introduction"]);
        assert!(g.generate_head_tail(&"i".into(), "B", &[], HeadTailKind::Conclusion).is_err());
    }

    #[test]
    fn chapter_is_stitched_under_headings() {
        let g = generator(Arc::new(MockChat::template()), 40);
        let d = g.generate_chapter(&"c".into(), "B", "Rock", &outline(), &reports(3), &|_, _| {}).unwrap();
        assert!(d.text_markdown.starts_with("# Rock\n\n## Dynamics\n\n### Fracture\n\nThis section addresses Fracture."));
        assert!(d.text_markdown.contains("### Waves\n\nThis section addresses Waves."));
        assert_eq!(d.batch_trace.len(), 2);
        assert_eq!(d.batch_trace[1].call, 1);
    }
}
