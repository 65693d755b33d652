use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use coauthor::api::{self, ApiState};
use coauthor::app::App;
use coauthor::jobs::{Job, JobManager, JobState};
use coauthor_core::config::Config;
use coauthor_core::providers::mock::{BowEmbedder, MockChat};
use coauthor_core::providers::{ChatProvider, Embedder, MemoryCache, Reliability};
use serde_json::{json, Value};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/e2e");
const DOCS: [&str; 5] = ["spalling", "branching", "attenuation", "learning", "waves"];

fn config(root: &Path) -> Config {
    let mut c = Config::load(Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../config/mock.toml"))).unwrap();
    c.store.root = root.to_path_buf();
    c
}

fn app_with(root: &Path, chat: Arc<dyn ChatProvider>) -> Arc<App> {
    let config = config(root);
    let embedder = Embedder::new(
        Arc::new(BowEmbedder::for_models(vec![("bow-link".into(), 512), ("bow-heading".into(), 256)])),
        Arc::new(MemoryCache::default()),
        Reliability::unlimited(),
        64,
    );
    Arc::new(App::with_backends(config, chat, embedder).unwrap())
}

struct Server {
    base: String,
    agent: ureq::Agent,
    _dir: tempfile::TempDir,
}

fn server_with(chat: Arc<dyn ChatProvider>) -> Server {
    let dir = tempfile::tempdir().unwrap();
    let jobs = JobManager::start(app_with(dir.path(), chat), 2).unwrap();
    let addr = api::spawn(ApiState { jobs: Arc::new(jobs) }, "127.0.0.1:0").unwrap();
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    Server { base: format!("http://{addr}/api/v1"), agent, _dir: dir }
}

fn server() -> Server {
    server_with(Arc::new(MockChat::template()))
}

impl Server {
    fn get(&self, path: &str) -> (u16, Value) {
        let mut r = self.agent.get(format!("{}{path}", self.base)).call().unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap_or(Value::Null))
    }

    fn send(&self, method: &str, path: &str, body: Value) -> (u16, Value) {
        let url = format!("{}{path}", self.base);
        let mut r = match method {
            "POST" => self.agent.post(url).send_json(&body),
            "PUT" => self.agent.put(url).send_json(&body),
            _ => unreachable!(),
        }
        .unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap_or(Value::Null))
    }

    fn post(&self, path: &str, body: Value) -> (u16, Value) {
        self.send("POST", path, body)
    }

    /// Creates a project and chapter; returns the chapter path prefix.
    fn chapter(&self, with_refs: bool) -> String {
        let (s, p) = self.post("/projects", json!({ "title": "Rock Dynamics" }));
        assert_eq!(s, 201, "{p}");
        let outline = std::fs::read_to_string(format!("{FIXTURE}/outline.txt")).unwrap();
        let pid = p["id"].as_str().unwrap();
        let (s, c) =
            self.post(&format!("/projects/{pid}/chapters"), json!({ "title": "Dynamic behaviour", "outline": outline }));
        assert_eq!(s, 201, "{c}");
        let at = format!("/projects/{pid}/chapters/{}", c["id"].as_str().unwrap());
        if with_refs {
            for name in DOCS {
                let body = std::fs::read_to_string(format!("{FIXTURE}/{name}.md")).unwrap();
                let (s, r) = self.post(&format!("{at}/references"), json!({ "body_markdown": body }));
                assert_eq!(s, 201, "{r}");
            }
        }
        at
    }

    fn status(&self, at: &str) -> String {
        self.get(at).1["status"].as_str().unwrap().to_string()
    }

    /// Submits a job and polls it to a terminal state.
    fn run_job(&self, at: &str, body: Value) -> Job {
        let (s, job) = self.post(&format!("{at}/jobs"), body);
        assert_eq!(s, 202, "{job}");
        self.wait(job["id"].as_str().unwrap())
    }

    fn wait(&self, id: &str) -> Job {
        let deadline = Instant::now() + Duration::from_secs(30);
        loop {
            let job: Job = serde_json::from_value(self.get(&format!("/jobs/{id}")).1).unwrap();
            if !job.state.is_active() {
                return job;
            }
            assert!(Instant::now() < deadline, "job {id} did not finish");
            std::thread::sleep(Duration::from_millis(10));
        }
    }
}

#[test]
fn workflow_over_http() {
    let srv = server();
    assert_eq!(srv.get("/health").0, 200);
    let at = srv.chapter(true);
    assert_eq!(srv.status(&at), "parsed");
    let (_, refs) = srv.get(&format!("{at}/references"));
    assert_eq!(refs.as_array().unwrap().iter().map(|r| r["idx"].as_u64().unwrap()).collect::<Vec<_>>(), [1, 2, 3, 4, 5]);
    assert_eq!(refs[0]["title"], "Spall strength of granite under plate impact");

    let (s, queued) = srv.post(&format!("{at}/jobs"), json!({ "kind": "compress" }));
    assert_eq!(s, 202);
    assert_eq!(queued["progress"]["total"], 5);
    let done = srv.wait(queued["id"].as_str().unwrap());
    assert_eq!(done.state, JobState::Done, "{:?}", done.error);
    assert_eq!((done.progress.done, done.progress.total), (5, 5));
    assert_eq!(srv.status(&at), "compressed");
    assert_eq!(srv.get(&format!("{at}/reports")).1.as_array().unwrap().len(), 5);

    let job = srv.run_job(&at, json!({ "kind": "generate" }));
    assert_eq!(job.state, JobState::Done, "{:?}", job.error);
    assert_eq!(job.result.as_ref().unwrap()["revision"], 0);
    assert_eq!(srv.status(&at), "generated");

    // Regenerating one leaf adds a revision and keeps the other sections.
    let job = srv.run_job(&at, json!({ "kind": "generate", "heading_path": ["Wave propagation", "Attenuation"] }));
    assert_eq!(job.state, JobState::Done, "{:?}", job.error);
    let (_, latest) = srv.get(&format!("{at}/drafts/latest"));
    assert_eq!(latest["revision"], 1);
    assert!(latest["text_markdown"].as_str().unwrap().contains("### Crack branching"));

    let text = latest["text_markdown"].as_str().unwrap().to_string();
    let (_, preview) = srv.post(&format!("{at}/correction-preview"), json!({ "text_markdown": text }));
    assert_eq!(preview["rate"], 0.0);
    let (s, saved) = srv.post(&format!("{at}/drafts"), json!({ "text_markdown": text }));
    assert_eq!(s, 201);
    assert_eq!(saved["revision"], 2);
    assert_eq!(saved["correction"]["rate"], 0.0);
    assert_eq!(srv.get(&format!("{at}/drafts")).1.as_array().unwrap().len(), 3);
    assert_eq!(srv.get(&format!("{at}/drafts/2/correction")).1["rate"], 0.0);

    let job = srv.run_job(&at, json!({ "kind": "link" }));
    assert_eq!(job.state, JobState::Done, "{:?}", job.error);
    assert_eq!(srv.status(&at), "linked");
    let (s, links) = srv.get(&format!("{at}/links/2"));
    assert_eq!(s, 200);
    assert_eq!(links["documents"].as_array().unwrap().len(), 5);
    let hit = &links["links"][1]["hits"][0];
    assert!(hit["block_text"].as_str().unwrap().len() > 10 && hit["score"].as_f64().unwrap() > 0.0);

    let mut previous = u64::MAX;
    for step in 0..=10 {
        let t = step as f64 / 10.0;
        let (_, view) = srv.get(&format!("{at}/links/2?threshold={t}"));
        let traceable = view["report"]["traceable"].as_u64().unwrap();
        let flagged = view["links"].as_array().unwrap().iter().filter(|l| l["traceable"] == true).count() as u64;
        assert_eq!(traceable, flagged);
        assert!(traceable <= previous, "threshold {t}");
        assert_eq!(view["threshold"], t);
        previous = traceable;
    }

    let sentence = std::fs::read_to_string(format!("{FIXTURE}/waves.md")).unwrap().lines().nth(2).unwrap().to_string();
    let (s, hits) = srv.post(&format!("{at}/trace"), json!({ "sentence": sentence, "k": 3 }));
    assert_eq!(s, 200, "{hits}");
    assert_eq!(hits.as_array().unwrap().len(), 3);
    assert_eq!(hits[0]["idx"], 5);

    let reference = std::fs::read_to_string(format!("{FIXTURE}/reference_chapter.md")).unwrap();
    let job = srv.run_job(&at, json!({ "kind": "evaluate", "reference_text": reference }));
    assert_eq!(job.state, JobState::Done, "{:?}", job.error);
    let (_, reports) = srv.get(&format!("{at}/metrics"));
    let report = &reports[0]["report"];
    assert!(report["shr"]["shr"].as_f64().unwrap() > 0.0);
    assert!(report["citation_accuracy"].is_number());

    let (s, ch) = srv.post(&format!("{at}/finalize"), json!({}));
    assert_eq!((s, ch["status"].as_str()), (200, Some("finalized")));
}

#[test]
fn validation_and_missing_resources() {
    let srv = server();
    let at = srv.chapter(false);
    let (s, e) = srv.post(&format!("{at}/jobs"), json!({ "kind": "generate" }));
    assert_eq!(s, 422);
    assert_eq!(e["error"]["kind"], "validation");
    let (s, _) = srv.post(&format!("{at}/jobs"), json!({ "kind": "compress" }));
    assert_eq!(s, 422);
    assert_eq!(srv.get("/jobs/nope").0, 404);
    assert_eq!(srv.get("/projects/nope").0, 404);
    assert_eq!(srv.get(&format!("{at}/drafts/latest")).0, 404);
    assert_eq!(srv.get(&format!("{at}/links/0")).0, 404);
    assert_eq!(srv.get("/no/such/route").0, 404);
    let (s, _) = srv.post(&format!("{at}/correction-preview"), json!({ "text_markdown": "x." }));
    assert_eq!(s, 404);
    let (s, _) = srv.send("PUT", &format!("{at}/outline"), json!({ "outline": "A\n    B\n" }));
    assert_eq!(s, 422);
    let (s, _) = srv.post("/projects", json!({ "title": "Rock Dynamics" }));
    assert_eq!(s, 409);
}

#[test]
fn busy_chapter_rejects_a_second_job() {
    let srv = server_with(Arc::new(MockChat::template().with_delay(Duration::from_millis(40))));
    let at = srv.chapter(true);
    let (s, first) = srv.post(&format!("{at}/jobs"), json!({ "kind": "compress" }));
    assert_eq!(s, 202);
    let (s, e) = srv.post(&format!("{at}/jobs"), json!({ "kind": "compress" }));
    assert_eq!(s, 409);
    assert_eq!(e["error"]["kind"], "conflict");
    assert_eq!(srv.wait(first["id"].as_str().unwrap()).state, JobState::Done);
    let (s, _) = srv.post(&format!("{at}/jobs"), json!({ "kind": "generate" }));
    assert_eq!(s, 202);
    let (s, _) = srv.post(&format!("{at}/jobs"), json!({ "kind": "generate" }));
    assert_eq!(s, 409);
}

#[test]
fn progress_never_decreases_while_polling() {
    let srv = server_with(Arc::new(MockChat::template().with_delay(Duration::from_millis(25))));
    let at = srv.chapter(true);
    let (_, job) = srv.post(&format!("{at}/jobs"), json!({ "kind": "compress" }));
    let id = job["id"].as_str().unwrap();
    let mut seen = Vec::new();
    loop {
        let j: Job = serde_json::from_value(srv.get(&format!("/jobs/{id}")).1).unwrap();
        seen.push(j.progress.done);
        assert_eq!(j.progress.total, 5);
        if !j.state.is_active() {
            break;
        }
        std::thread::sleep(Duration::from_millis(3));
    }
    assert!(seen.windows(2).all(|w| w[0] <= w[1]), "{seen:?}");
    assert_eq!(*seen.last().unwrap(), 5);
    assert!(seen.iter().any(|&d| d > 0 && d < 5), "no intermediate progress seen: {seen:?}");
}

#[test]
fn provider_failure_marks_the_job_failed() {
    let srv = server_with(Arc::new(MockChat::refusing()));
    let at = srv.chapter(true);
    let job = srv.run_job(&at, json!({ "kind": "compress" }));
    assert_eq!(job.state, JobState::Failed);
    assert!(job.error.unwrap().contains("failed to compress"));
    assert_eq!(srv.status(&at), "parsed");
}

#[test]
fn restart_fails_interrupted_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(dir.path(), Arc::new(MockChat::template()));
    let p = app.create_project("Book").unwrap();
    let c = app.create_chapter(&p.id, "One", Default::default(), "A\n", None).unwrap();
    app.add_reference_text(&p.id, &c.id, None, "Alpha text here.".into()).unwrap();
    let manager = JobManager::start(app.clone(), 1).unwrap();
    let job = manager
        .submit(&p.id, &c.id, serde_json::from_value(json!({ "kind": "ingest" })).unwrap())
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(10);
    while manager.get(&job.id).unwrap().state.is_active() {
        assert!(Instant::now() < deadline);
        std::thread::sleep(Duration::from_millis(5));
    }
    drop(manager);

    // Leave a record the way a killed process would.
    let mut stuck = job.clone();
    stuck.id = "stuck".into();
    stuck.state = JobState::Running;
    app.store().write_json(&app.store().job_path("stuck"), &stuck).unwrap();

    let again = JobManager::start(app.clone(), 1).unwrap();
    let recovered = again.get("stuck").unwrap();
    assert_eq!(recovered.state, JobState::Failed);
    assert!(recovered.error.unwrap().contains("restart"));
    assert_eq!(again.get(&job.id).unwrap().state, JobState::Done);
    assert_eq!(again.list(Some((&p.id, &c.id))).len(), 2);
    // The chapter is still readable and a new job can start.
    assert!(again.submit(&p.id, &c.id, serde_json::from_value(json!({ "kind": "compress" })).unwrap()).is_ok());
}
