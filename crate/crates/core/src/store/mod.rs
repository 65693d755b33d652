//! On-disk project workspace.
//!
//! Everything is pretty-printed JSON written atomically (temp file, then
//! rename). Layout under the store root:
//!
//! ```text
//! projects/<project>/project.json
//! projects/<project>/chapters/<chapter>/chapter.json
//!     references/<doc>.json      ingested reference documents
//!     reports/<doc>.json         compressed reports
//!     drafts/<NNNN>.json         draft revisions, 0-based, immutable
//!     links/<NNNN>.json          citation links for revision NNNN
//!     metrics/<timestamp>.json   metric reports
//!     index/                     blocks.json, flat.bin, ivfsq8.bin
//! jobs/<job>.json
//! ```

mod outline;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use outline::{Outline, OutlineFormat, OutlineNode};

use crate::compressor::CompressedReport;
use crate::generator::SectionDraft;
use crate::ingest::{DocId, ReferenceDoc};
use crate::linker::LinkSet;
use crate::metrics::MetricReport;
use crate::providers::cache::write_atomic;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{kind} not found: {id}")]
    NotFound { kind: &'static str, id: String },
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("corrupted file {path}: {reason}")]
    Integrity { path: PathBuf, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

macro_rules! id_type {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn random() -> Self {
                Self(uuid::Uuid::new_v4().simple().to_string())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

id_type!(ProjectId);
id_type!(ChapterId);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub id: ProjectId,
    pub title: String,
    pub created_at: DateTime<Utc>,
    pub chapters: Vec<ChapterId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChapterStatus {
    Empty,
    Parsed,
    Compressed,
    Generated,
    Linked,
    Finalized,
}

impl ChapterStatus {
    /// Forward moves (including skips), staying put, or a reset to `Parsed`.
    pub fn can_become(self, next: ChapterStatus) -> bool {
        next >= self || next == ChapterStatus::Parsed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChapterRole {
    #[default]
    Body,
    Introduction,
    Conclusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chapter {
    pub id: ChapterId,
    pub project_id: ProjectId,
    pub title: String,
    #[serde(default)]
    pub role: ChapterRole,
    pub outline: Outline,
    pub reference_ids: Vec<DocId>,
    /// Draft revision ids, oldest first. Revision `i` lives in `drafts/{i:04}.json`.
    pub draft_revisions: Vec<String>,
    pub status: ChapterStatus,
}

impl Chapter {
    fn validate(&self) -> Result<(), StoreError> {
        self.outline.validate()?;
        let mut seen = HashSet::new();
        if let Some(dup) = self.reference_ids.iter().find(|id| !seen.insert(*id)) {
            return Err(StoreError::Validation(format!("reference {dup} listed twice")));
        }
        Ok(())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

fn revision_name(rev: usize) -> String {
    format!("{rev:04}.json")
}

/// Handle on a store root. Cheap to share; mutations of one project are
/// serialized through a per-project lock.
#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    locks: Mutex<HashMap<ProjectId, Arc<Mutex<()>>>>,
    create_lock: Mutex<()>,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for dir in [root.join("projects"), root.join("jobs")] {
            std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        Ok(Self { root, locks: Mutex::default(), create_lock: Mutex::default() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Write lock for one project.
    pub fn project_lock(&self, id: &ProjectId) -> Arc<Mutex<()>> {
        self.locks.lock().unwrap().entry(id.clone()).or_default().clone()
    }

    pub fn project_dir(&self, id: &ProjectId) -> PathBuf {
        self.root.join("projects").join(&id.0)
    }

    pub fn chapter_dir(&self, pid: &ProjectId, cid: &ChapterId) -> PathBuf {
        self.project_dir(pid).join("chapters").join(&cid.0)
    }

    pub fn index_dir(&self, pid: &ProjectId, cid: &ChapterId) -> PathBuf {
        self.chapter_dir(pid, cid).join("index")
    }

    pub fn jobs_dir(&self) -> PathBuf {
        self.root.join("jobs")
    }

    /// Serializes `value` to `path` atomically.
    pub fn write_json<T: Serialize>(&self, path: &Path, value: &T) -> Result<(), StoreError> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| StoreError::Validation(format!("cannot serialize {}: {e}", path.display())))?;
        bytes.push(b'\n');
        write_atomic(path, &bytes).map_err(io_err(path))
    }

    /// Reads `path`; a missing file is `NotFound`, an unparsable one `Integrity`.
    pub fn read_json<T: DeserializeOwned>(&self, path: &Path, kind: &'static str, id: &str) -> Result<T, StoreError> {
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound { kind, id: id.to_string() })
            }
            Err(e) => return Err(io_err(path)(e)),
        };
        serde_json::from_slice(&bytes).map_err(|e| StoreError::Integrity { path: path.to_path_buf(), reason: e.to_string() })
    }

    fn json_files(&self, dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
        let entries = match std::fs::read_dir(dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(dir)(e)),
        };
        let mut out = Vec::new();
        for entry in entries {
            let path = entry.map_err(io_err(dir))?.path();
            if path.extension().is_some_and(|e| e == "json") {
                out.push(path);
            }
        }
        out.sort();
        Ok(out)
    }

    // Projects

    pub fn create_project(&self, title: &str) -> Result<Project, StoreError> {
        let title = title.trim();
        if title.is_empty() {
            return Err(StoreError::Validation("project title is empty".into()));
        }
        let _guard = self.create_lock.lock().unwrap();
        if self.list_projects()?.iter().any(|p| p.title == title) {
            return Err(StoreError::Conflict(format!("a project titled {title:?} already exists")));
        }
        let project = Project { id: ProjectId::random(), title: title.to_string(), created_at: Utc::now(), chapters: vec![] };
        self.save_project(&project)?;
        Ok(project)
    }

    pub fn save_project(&self, project: &Project) -> Result<(), StoreError> {
        if project.title.trim().is_empty() {
            return Err(StoreError::Validation("project title is empty".into()));
        }
        self.write_json(&self.project_dir(&project.id).join("project.json"), project)
    }

    pub fn load_project(&self, id: &ProjectId) -> Result<Project, StoreError> {
        self.read_json(&self.project_dir(id).join("project.json"), "project", &id.0)
    }

    pub fn list_projects(&self) -> Result<Vec<Project>, StoreError> {
        let dir = self.root.join("projects");
        let mut out = Vec::new();
        for entry in std::fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path().join("project.json");
            if path.exists() {
                out.push(self.read_json::<Project>(&path, "project", "")?);
            }
        }
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        Ok(out)
    }

    // Chapters

    pub fn create_chapter(
        &self,
        pid: &ProjectId,
        title: &str,
        role: ChapterRole,
        outline: Outline,
    ) -> Result<Chapter, StoreError> {
        if title.trim().is_empty() {
            return Err(StoreError::Validation("chapter title is empty".into()));
        }
        let lock = self.project_lock(pid);
        let _guard = lock.lock().unwrap();
        let mut project = self.load_project(pid)?;
        let chapter = Chapter {
            id: ChapterId::random(),
            project_id: pid.clone(),
            title: title.trim().to_string(),
            role,
            outline,
            reference_ids: vec![],
            draft_revisions: vec![],
            status: ChapterStatus::Empty,
        };
        self.save_chapter(&chapter)?;
        project.chapters.push(chapter.id.clone());
        self.save_project(&project)?;
        Ok(chapter)
    }

    pub fn save_chapter(&self, chapter: &Chapter) -> Result<(), StoreError> {
        chapter.validate()?;
        self.write_json(&self.chapter_dir(&chapter.project_id, &chapter.id).join("chapter.json"), chapter)
    }

    pub fn load_chapter(&self, pid: &ProjectId, cid: &ChapterId) -> Result<Chapter, StoreError> {
        self.read_json(&self.chapter_dir(pid, cid).join("chapter.json"), "chapter", &cid.0)
    }

    pub fn list_chapters(&self, pid: &ProjectId) -> Result<Vec<Chapter>, StoreError> {
        let project = self.load_project(pid)?;
        project.chapters.iter().map(|cid| self.load_chapter(pid, cid)).collect()
    }

    /// Loads, mutates and saves a chapter under the project lock.
    pub fn update_chapter<R>(
        &self,
        pid: &ProjectId,
        cid: &ChapterId,
        f: impl FnOnce(&mut Chapter) -> Result<R, StoreError>,
    ) -> Result<R, StoreError> {
        let lock = self.project_lock(pid);
        let _guard = lock.lock().unwrap();
        let mut chapter = self.load_chapter(pid, cid)?;
        let before = chapter.draft_revisions.len();
        let out = f(&mut chapter)?;
        if chapter.draft_revisions.len() < before {
            return Err(StoreError::Validation("draft history is append-only".into()));
        }
        self.save_chapter(&chapter)?;
        Ok(out)
    }

    pub fn set_outline(&self, pid: &ProjectId, cid: &ChapterId, outline: Outline) -> Result<(), StoreError> {
        outline.validate()?;
        self.update_chapter(pid, cid, |c| {
            c.outline = outline;
            Ok(())
        })
    }

    pub fn set_status(&self, pid: &ProjectId, cid: &ChapterId, status: ChapterStatus) -> Result<(), StoreError> {
        self.update_chapter(pid, cid, |c| {
            if !c.status.can_become(status) {
                return Err(StoreError::Validation(format!("chapter cannot move from {:?} to {status:?}", c.status)));
            }
            c.status = status;
            Ok(())
        })
    }

    // References

    /// Stores `doc` and appends it to the chapter's reference list. Citation
    /// indices must be unique within the chapter.
    pub fn add_reference(&self, pid: &ProjectId, cid: &ChapterId, doc: &ReferenceDoc) -> Result<(), StoreError> {
        let existing = self.load_references(pid, cid)?;
        if existing.iter().any(|d| d.idx == doc.idx) {
            return Err(StoreError::Conflict(format!("citation index {} is already used in this chapter", doc.idx)));
        }
        self.update_chapter(pid, cid, |c| {
            if c.reference_ids.contains(&doc.id) {
                return Err(StoreError::Conflict(format!("reference {} already added", doc.id)));
            }
            self.write_json(&self.chapter_dir(pid, cid).join("references").join(format!("{}.json", doc.id)), doc)?;
            c.reference_ids.push(doc.id.clone());
            if c.status == ChapterStatus::Empty {
                c.status = ChapterStatus::Parsed;
            }
            Ok(())
        })
    }

    pub fn load_reference(&self, pid: &ProjectId, cid: &ChapterId, id: &DocId) -> Result<ReferenceDoc, StoreError> {
        let path = self.chapter_dir(pid, cid).join("references").join(format!("{id}.json"));
        self.read_json(&path, "reference", &id.0)
    }

    /// All chapter references ordered by citation index.
    pub fn load_references(&self, pid: &ProjectId, cid: &ChapterId) -> Result<Vec<ReferenceDoc>, StoreError> {
        let chapter = self.load_chapter(pid, cid)?;
        let mut docs = chapter
            .reference_ids
            .iter()
            .map(|id| self.load_reference(pid, cid, id))
            .collect::<Result<Vec<_>, _>>()?;
        docs.sort_by_key(|d| d.idx);
        Ok(docs)
    }

    // Reports

    pub fn put_report(&self, pid: &ProjectId, cid: &ChapterId, report: &CompressedReport) -> Result<(), StoreError> {
        self.write_json(&self.chapter_dir(pid, cid).join("reports").join(format!("{}.json", report.doc_id)), report)
    }

    pub fn load_report(&self, pid: &ProjectId, cid: &ChapterId, id: &DocId) -> Result<CompressedReport, StoreError> {
        self.read_json(&self.chapter_dir(pid, cid).join("reports").join(format!("{id}.json")), "report", &id.0)
    }

    /// Reports for every chapter reference that has one, ordered by idx.
    pub fn load_reports(&self, pid: &ProjectId, cid: &ChapterId) -> Result<Vec<CompressedReport>, StoreError> {
        let chapter = self.load_chapter(pid, cid)?;
        let mut out = Vec::new();
        for id in &chapter.reference_ids {
            match self.load_report(pid, cid, id) {
                Ok(r) => out.push(r),
                Err(StoreError::NotFound { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        out.sort_by_key(|r| r.idx);
        Ok(out)
    }

    // Drafts

    /// Appends an immutable revision and returns its 0-based index.
    pub fn append_draft_revision(&self, pid: &ProjectId, cid: &ChapterId, draft: &SectionDraft) -> Result<usize, StoreError> {
        self.update_chapter(pid, cid, |c| {
            let rev = c.draft_revisions.len();
            let path = self.chapter_dir(pid, cid).join("drafts").join(revision_name(rev));
            if path.exists() {
                return Err(StoreError::Integrity { path, reason: "revision file exists but is not listed".into() });
            }
            self.write_json(&path, draft)?;
            c.draft_revisions.push(draft.id.clone());
            Ok(rev)
        })
    }

    pub fn load_draft(&self, pid: &ProjectId, cid: &ChapterId, rev: usize) -> Result<SectionDraft, StoreError> {
        let path = self.chapter_dir(pid, cid).join("drafts").join(revision_name(rev));
        self.read_json(&path, "draft revision", &rev.to_string())
    }

    pub fn latest_revision(&self, pid: &ProjectId, cid: &ChapterId) -> Result<Option<usize>, StoreError> {
        Ok(self.load_chapter(pid, cid)?.draft_revisions.len().checked_sub(1))
    }

    // Links and metrics

    pub fn put_links(&self, pid: &ProjectId, cid: &ChapterId, links: &LinkSet) -> Result<(), StoreError> {
        let path = self.chapter_dir(pid, cid).join("links").join(revision_name(links.revision));
        self.write_json(&path, links)
    }

    pub fn load_links(&self, pid: &ProjectId, cid: &ChapterId, rev: usize) -> Result<LinkSet, StoreError> {
        let path = self.chapter_dir(pid, cid).join("links").join(revision_name(rev));
        self.read_json(&path, "citation links", &rev.to_string())
    }

    /// Stores a metric report and returns its file stem.
    pub fn put_metric_report(&self, pid: &ProjectId, cid: &ChapterId, report: &MetricReport) -> Result<String, StoreError> {
        let dir = self.chapter_dir(pid, cid).join("metrics");
        let base = report.created_at.format("%Y%m%dT%H%M%S%.6fZ").to_string();
        let mut name = base.clone();
        let mut n = 1;
        while dir.join(format!("{name}.json")).exists() {
            name = format!("{base}-{n}");
            n += 1;
        }
        self.write_json(&dir.join(format!("{name}.json")), report)?;
        Ok(name)
    }

    pub fn list_metric_reports(&self, pid: &ProjectId, cid: &ChapterId) -> Result<Vec<(String, MetricReport)>, StoreError> {
        self.json_files(&self.chapter_dir(pid, cid).join("metrics"))?
            .into_iter()
            .map(|p| {
                let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
                Ok((stem.clone(), self.read_json(&p, "metric report", &stem)?))
            })
            .collect()
    }

    // Jobs

    pub fn job_path(&self, id: &str) -> PathBuf {
        self.jobs_dir().join(format!("{id}.json"))
    }

    pub fn list_job_files(&self) -> Result<Vec<PathBuf>, StoreError> {
        self.json_files(&self.jobs_dir())
    }
}
