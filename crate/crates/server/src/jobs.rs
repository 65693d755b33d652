//! Background jobs: a bounded pool of worker threads over persisted job records.

use std::collections::BTreeMap;
use std::sync::mpsc;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use coauthor_core::store::{ChapterId, ProjectId};

use crate::app::{App, EvaluateParams};
use crate::error::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    /// Chunk, embed and index the chapter references.
    Ingest,
    Compress,
    Generate,
    Link,
    Evaluate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_active(self) -> bool {
        matches!(self, JobState::Queued | JobState::Running)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct JobProgress {
    pub done: usize,
    pub total: usize,
}

/// Kind-specific job parameters. Unused fields are ignored.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct JobParams {
    /// Generate: regenerate only this outline leaf.
    pub heading_path: Option<Vec<String>>,
    /// Link and evaluate: revision to use; latest when absent.
    pub revision: Option<usize>,
    /// Evaluate: text of the reference chapter.
    pub reference_text: Option<String>,
    pub reference_headings: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRequest {
    pub kind: JobKind,
    #[serde(flatten)]
    pub params: JobParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub kind: JobKind,
    pub state: JobState,
    pub project_id: ProjectId,
    pub chapter_id: ChapterId,
    pub params: JobParams,
    pub progress: JobProgress,
    pub error: Option<String>,
    /// Summary of what a finished job produced.
    pub result: Option<serde_json::Value>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

struct Shared {
    app: Arc<App>,
    jobs: Mutex<BTreeMap<String, Job>>,
}

pub struct JobManager {
    shared: Arc<Shared>,
    queue: Mutex<mpsc::Sender<String>>,
}

impl Shared {
    fn persist(&self, job: &Job) {
        if let Err(e) = self.app.store().write_json(&self.app.store().job_path(&job.id), job) {
            eprintln!("warning: cannot persist job {}: {e}", job.id);
        }
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut Job)) {
        let snapshot = {
            let mut jobs = self.jobs.lock().unwrap();
            let Some(job) = jobs.get_mut(id) else { return };
            f(job);
            job.updated_at = Utc::now();
            job.clone()
        };
        self.persist(&snapshot);
    }

    fn run(&self, id: &str) {
        let Some(job) = self.jobs.lock().unwrap().get(id).cloned() else { return };
        self.update(id, |j| j.state = JobState::Running);
        let progress = |done: usize, total: usize| {
            self.update(id, |j| {
                j.progress.total = j.progress.total.max(total);
                j.progress.done = j.progress.done.max(done).min(j.progress.total);
            })
        };
        match execute(&self.app, &job, &progress) {
            Ok(result) => self.update(id, |j| {
                j.state = JobState::Done;
                j.progress.done = j.progress.total;
                j.result = Some(result);
            }),
            Err(e) => self.update(id, |j| {
                j.state = JobState::Failed;
                j.error = Some(e.to_string());
            }),
        }
    }
}

fn to_value<T: Serialize>(v: T) -> serde_json::Value {
    serde_json::to_value(v).expect("job results serialize")
}

fn execute(app: &App, job: &Job, progress: &(dyn Fn(usize, usize) + Sync)) -> Result<serde_json::Value, AppError> {
    let (pid, cid, p) = (&job.project_id, &job.chapter_id, &job.params);
    Ok(match job.kind {
        JobKind::Ingest => to_value(app.build_index(pid, cid, progress)?),
        JobKind::Compress => to_value(app.compress(pid, cid, progress)?),
        JobKind::Generate => to_value(app.generate(pid, cid, p.heading_path.as_deref(), progress)?),
        JobKind::Link => to_value(app.link(pid, cid, p.revision, progress)?),
        JobKind::Evaluate => {
            let summary = app.evaluate(pid, cid, &evaluate_params(p)?)?;
            progress(1, 1);
            serde_json::json!({ "metric_report": summary.name })
        }
    })
}

fn evaluate_params(p: &JobParams) -> Result<EvaluateParams, AppError> {
    Ok(EvaluateParams {
        reference_text: p
            .reference_text
            .clone()
            .ok_or_else(|| AppError::Validation("evaluate needs reference_text".into()))?,
        reference_headings: p.reference_headings.clone(),
        revision: p.revision,
    })
}

/// Checks a request against the chapter and returns its unit count.
fn total_units(app: &App, pid: &ProjectId, cid: &ChapterId, req: &JobRequest) -> Result<usize, AppError> {
    let store = app.store();
    let chapter = store.load_chapter(pid, cid)?;
    let n_refs = chapter.reference_ids.len();
    let need_refs = || {
        if n_refs == 0 {
            Err(AppError::Validation("the chapter has no references".into()))
        } else {
            Ok(())
        }
    };
    let need_draft = || match req.params.revision {
        Some(r) if r >= chapter.draft_revisions.len() => Err(AppError::NotFound(format!("draft revision {r}"))),
        _ if chapter.draft_revisions.is_empty() => Err(AppError::Validation("the chapter has no draft".into())),
        _ => Ok(()),
    };
    match req.kind {
        JobKind::Ingest | JobKind::Compress => {
            need_refs()?;
            Ok(n_refs)
        }
        JobKind::Generate => app.generate_units(pid, cid, req.params.heading_path.as_deref()),
        JobKind::Link => {
            need_refs()?;
            need_draft()?;
            Ok(1)
        }
        JobKind::Evaluate => {
            need_draft()?;
            let p = evaluate_params(&req.params)?;
            if p.reference_text.trim().is_empty() {
                return Err(AppError::Validation("reference text is empty".into()));
            }
            Ok(1)
        }
    }
}

impl JobManager {
    /// Loads persisted jobs, fails the ones a previous process left
    /// unfinished, and starts `workers` threads.
    pub fn start(app: Arc<App>, workers: usize) -> Result<Self, AppError> {
        let mut jobs = BTreeMap::new();
        for path in app.store().list_job_files()? {
            let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let mut job: Job = app.store().read_json(&path, "job", &stem)?;
            if job.state.is_active() {
                job.state = JobState::Failed;
                job.error = Some("interrupted by a service restart".into());
                job.updated_at = Utc::now();
                app.store().write_json(&path, &job)?;
            }
            jobs.insert(job.id.clone(), job);
        }
        let shared = Arc::new(Shared { app, jobs: Mutex::new(jobs) });
        let (tx, rx) = mpsc::channel::<String>();
        let rx = Arc::new(Mutex::new(rx));
        for n in 0..workers.max(1) {
            let shared = shared.clone();
            let rx = rx.clone();
            std::thread::Builder::new()
                .name(format!("job-worker-{n}"))
                .spawn(move || loop {
                    let next = rx.lock().unwrap().recv();
                    match next {
                        Ok(id) => shared.run(&id),
                        Err(_) => break,
                    }
                })
                .map_err(|source| AppError::Io { path: "job worker".into(), source })?;
        }
        Ok(Self { shared, queue: Mutex::new(tx) })
    }

    pub fn app(&self) -> &Arc<App> {
        &self.shared.app
    }

    /// Queues a job. At most one queued or running job exists per chapter.
    pub fn submit(&self, pid: &ProjectId, cid: &ChapterId, req: JobRequest) -> Result<Job, AppError> {
        let total = total_units(&self.shared.app, pid, cid, &req)?;
        let now = Utc::now();
        let job = Job {
            id: uuid::Uuid::new_v4().simple().to_string(),
            kind: req.kind,
            state: JobState::Queued,
            project_id: pid.clone(),
            chapter_id: cid.clone(),
            params: req.params,
            progress: JobProgress { done: 0, total },
            error: None,
            result: None,
            created_at: now,
            updated_at: now,
        };
        {
            let mut jobs = self.shared.jobs.lock().unwrap();
            if let Some(busy) = jobs.values().find(|j| j.state.is_active() && j.chapter_id == *cid && j.project_id == *pid) {
                return Err(AppError::Conflict(format!("job {} ({:?}) is still active on this chapter", busy.id, busy.kind)));
            }
            jobs.insert(job.id.clone(), job.clone());
        }
        self.shared.persist(&job);
        self.queue.lock().unwrap().send(job.id.clone()).expect("workers outlive the manager");
        Ok(job)
    }

    pub fn get(&self, id: &str) -> Result<Job, AppError> {
        self.shared.jobs.lock().unwrap().get(id).cloned().ok_or_else(|| AppError::NotFound(format!("job {id}")))
    }

    /// All jobs, oldest first, optionally limited to one chapter.
    pub fn list(&self, chapter: Option<(&ProjectId, &ChapterId)>) -> Vec<Job> {
        let mut out: Vec<Job> = self
            .shared
            .jobs
            .lock()
            .unwrap()
            .values()
            .filter(|j| chapter.is_none_or(|(p, c)| j.project_id == *p && j.chapter_id == *c))
            .cloned()
            .collect();
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        out
    }
}
