use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use coauthor::api::{self, ApiState};
use coauthor::app::{read_text, App, EvaluateParams};
use coauthor::jobs::JobManager;
use coauthor::{load_config, AppError};
use coauthor_core::ingest::DocumentKind;
use coauthor_core::metrics::{self, shr, HeadingRole, Normalization};
use coauthor_core::prompts::HEADING_PATH_SEPARATOR;
use coauthor_core::store::{ChapterId, ChapterRole, ProjectId};

#[derive(Debug, Parser)]
#[command(name = "coauthor", version, about = "Draft cited book chapters from reference collections")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "COAUTHOR_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides `store.root` from the configuration.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    #[command(subcommand)]
    Project(ProjectCmd),
    #[command(subcommand)]
    Chapter(ChapterCmd),
    /// Add reference files to a chapter and rebuild its block index.
    Ingest {
        #[command(flatten)]
        at: ChapterArgs,
        /// Document kind for every file; guessed from the extension otherwise.
        #[arg(long, value_parser = snake_enum::<DocumentKind>)]
        kind: Option<DocumentKind>,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Compress every reference into a report.
    Compress(ChapterArgs),
    /// Generate the chapter as a new draft revision.
    Generate {
        #[command(flatten)]
        at: ChapterArgs,
        /// Regenerate one outline leaf, e.g. "Dynamics > Fracture".
        #[arg(long)]
        section: Option<String>,
    },
    /// Generate an introduction or conclusion chapter from the body chapters.
    HeadTail(ChapterArgs),
    #[command(subcommand)]
    Draft(DraftCmd),
    /// Trace every sentence of a revision back to the references.
    Link {
        #[command(flatten)]
        at: ChapterArgs,
        #[arg(long)]
        revision: Option<usize>,
        /// Overrides `linker.threshold`.
        #[arg(long)]
        threshold: Option<f64>,
        /// Print every link instead of the summary.
        #[arg(long)]
        full: bool,
    },
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Run the HTTP API.
    Serve {
        /// Overrides `api.bind`.
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Debug, Args)]
struct ChapterArgs {
    #[arg(long)]
    project: String,
    #[arg(long)]
    chapter: String,
}

impl ChapterArgs {
    fn ids(&self) -> (ProjectId, ChapterId) {
        (ProjectId(self.project.clone()), ChapterId(self.chapter.clone()))
    }
}

#[derive(Debug, Subcommand)]
enum ProjectCmd {
    New { title: String },
    List,
    Show { project: String },
}

#[derive(Debug, Subcommand)]
enum ChapterCmd {
    New {
        #[arg(long)]
        project: String,
        #[arg(long)]
        title: String,
        /// Outline file: indented text, bullets or Markdown headings.
        #[arg(long)]
        outline: Option<PathBuf>,
        #[arg(long, default_value = "body", value_parser = snake_enum::<ChapterRole>)]
        role: ChapterRole,
    },
    Show(ChapterArgs),
    /// Replace the outline.
    Outline {
        #[command(flatten)]
        at: ChapterArgs,
        file: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum DraftCmd {
    List(ChapterArgs),
    Show {
        #[command(flatten)]
        at: ChapterArgs,
        #[arg(long)]
        revision: Option<usize>,
        /// Print only the Markdown text.
        #[arg(long)]
        text: bool,
    },
    /// Save the file as a new edited revision.
    Edit {
        #[command(flatten)]
        at: ChapterArgs,
        file: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum EvalCmd {
    /// Soft heading recall between two heading lists.
    Shr {
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
    /// ROUGE-1, ROUGE-2 and ROUGE-L.
    Rouge {
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
    /// Correction rate between an initial and a final draft.
    Correction {
        #[arg(long)]
        initial: PathBuf,
        #[arg(long)]
        r#final: PathBuf,
        #[arg(long, value_parser = snake_enum::<Normalization>)]
        normalization: Option<Normalization>,
    },
    /// Full metric report for a chapter revision, stored with the chapter.
    Report {
        #[command(flatten)]
        at: ChapterArgs,
        /// Reference chapter text.
        #[arg(long)]
        reference: PathBuf,
        /// Reference headings; taken from the reference text when absent.
        #[arg(long)]
        headings: Option<PathBuf>,
        #[arg(long)]
        revision: Option<usize>,
    },
}

fn snake_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

fn print<T: Serialize>(value: &T) {
    write_out(&format!("{}\n", serde_json::to_string_pretty(value).expect("output serializes")));
}

/// Writes to stdout, ignoring a closed pipe.
fn write_out(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn reporter(label: &'static str) -> impl Fn(usize, usize) + Sync {
    move |done, total| eprintln!("{label}: {done}/{total}")
}

/// Markdown headings of the file, or its non-blank lines when it has none.
fn heading_list(path: &Path) -> Result<Vec<String>, AppError> {
    let text = read_text(path)?;
    let headings = metrics::markdown_headings(&text);
    if !headings.is_empty() {
        return Ok(headings);
    }
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect())
}

fn run(cli: Cli) -> Result<(), AppError> {
    let mut config = load_config(cli.config.as_deref())?;
    if let Some(root) = cli.store {
        config.store.root = root;
    }
    match cli.command {
        Command::Link { threshold: Some(t), .. } => config.linker.threshold = t,
        Command::Eval(EvalCmd::Correction { normalization: Some(n), .. }) => config.metrics.normalization = n,
        _ => {}
    }

    match cli.command {
        Command::Eval(EvalCmd::Rouge { candidate, reference }) => {
            let (c, r) = (read_text(&candidate)?, read_text(&reference)?);
            print(&serde_json::json!({
                "rouge1": metrics::rouge_n(&c, &r, 1),
                "rouge2": metrics::rouge_n(&c, &r, 2),
                "rouge_l": metrics::rouge_l(&c, &r),
            }));
            return Ok(());
        }
        Command::Eval(EvalCmd::Correction { initial, r#final, .. }) => {
            let segmenter = config.ingest.segmenter()?;
            let stats = metrics::correction_rate(
                &read_text(&initial)?,
                &read_text(&r#final)?,
                &segmenter,
                config.metrics.normalization,
            )?;
            print(&stats);
            return Ok(());
        }
        _ => {}
    }

    let app = Arc::new(App::new(config)?);
    match cli.command {
        Command::Project(cmd) => match cmd {
            ProjectCmd::New { title } => print(&app.create_project(&title)?),
            ProjectCmd::List => print(&app.store().list_projects()?),
            ProjectCmd::Show { project } => {
                let pid = ProjectId(project);
                print(&serde_json::json!({
                    "project": app.store().load_project(&pid)?,
                    "chapters": app.store().list_chapters(&pid)?,
                }));
            }
        },
        Command::Chapter(cmd) => match cmd {
            ChapterCmd::New { project, title, outline, role } => {
                let text = outline.as_deref().map(read_text).transpose()?.unwrap_or_default();
                print(&app.create_chapter(&ProjectId(project), &title, role, &text, None)?);
            }
            ChapterCmd::Show(at) => {
                let (pid, cid) = at.ids();
                print(&app.store().load_chapter(&pid, &cid)?);
            }
            ChapterCmd::Outline { at, file } => {
                let (pid, cid) = at.ids();
                print(&app.set_outline(&pid, &cid, &read_text(&file)?, None)?);
            }
        },
        Command::Ingest { at, kind, files } => {
            let (pid, cid) = at.ids();
            let docs = app.add_reference_files(&pid, &cid, &files, kind)?;
            let index = app.build_index(&pid, &cid, &reporter("index"))?;
            let added: Vec<_> = docs.iter().map(coauthor::app::ReferenceSummary::from).collect();
            print(&serde_json::json!({ "added": added, "index": index }));
        }
        Command::Compress(at) => {
            let (pid, cid) = at.ids();
            print(&app.compress(&pid, &cid, &reporter("compress"))?);
        }
        Command::Generate { at, section } => {
            let (pid, cid) = at.ids();
            let path: Option<Vec<String>> =
                section.map(|s| s.split(HEADING_PATH_SEPARATOR.trim()).map(|h| h.trim().to_string()).collect());
            print(&app.generate(&pid, &cid, path.as_deref(), &reporter("generate"))?);
        }
        Command::HeadTail(at) => {
            let (pid, cid) = at.ids();
            if app.store().load_chapter(&pid, &cid)?.role == ChapterRole::Body {
                return Err(AppError::Validation("head-tail needs an introduction or conclusion chapter".into()));
            }
            print(&app.generate(&pid, &cid, None, &reporter("generate"))?);
        }
        Command::Draft(cmd) => match cmd {
            DraftCmd::List(at) => {
                let (pid, cid) = at.ids();
                print(&app.drafts(&pid, &cid)?);
            }
            DraftCmd::Show { at, revision, text } => {
                let (pid, cid) = at.ids();
                let (_, draft) = app.draft(&pid, &cid, revision)?;
                if text {
                    write_out(&draft.text_markdown);
                } else {
                    print(&draft);
                }
            }
            DraftCmd::Edit { at, file } => {
                let (pid, cid) = at.ids();
                let text = read_text(&file)?;
                let correction = app.correction(&pid, &cid, &text).ok();
                let revision = app.edit_draft(&pid, &cid, text)?;
                print(&serde_json::json!({ "revision": revision, "correction": correction }));
            }
        },
        Command::Link { at, revision, full, .. } => {
            let (pid, cid) = at.ids();
            let summary = app.link(&pid, &cid, revision, &reporter("link"))?;
            if full {
                print(&app.links(&pid, &cid, summary.revision, None)?);
            } else {
                print(&summary);
            }
        }
        Command::Eval(EvalCmd::Shr { generated, reference }) => {
            let profile = &app.config().providers.embedding.heading_eval;
            let g = metrics::embed_headings(heading_list(&generated)?, HeadingRole::Generated, app.embedder(), profile)?;
            let r = metrics::embed_headings(heading_list(&reference)?, HeadingRole::Reference, app.embedder(), profile)?;
            print(&shr::soft_heading_recall_breakdown(&g, &r)?);
        }
        Command::Eval(EvalCmd::Report { at, reference, headings, revision }) => {
            let (pid, cid) = at.ids();
            let params = EvaluateParams {
                reference_text: read_text(&reference)?,
                reference_headings: headings.as_deref().map(heading_list).transpose()?,
                revision,
            };
            print(&app.evaluate(&pid, &cid, &params)?);
        }
        Command::Eval(_) => unreachable!("handled before the store is opened"),
        Command::Serve { bind } => {
            let bind = bind.unwrap_or_else(|| app.config().api.bind.clone());
            let workers = app.config().api.workers;
            let state = ApiState { jobs: Arc::new(JobManager::start(app, workers)?) };
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|source| AppError::Io { path: "tokio runtime".into(), source })?;
            runtime.block_on(api::serve(state, &bind))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                "not_found" => 3,
                "conflict" => 4,
                "validation" | "undefined_rate" => 2,
                "provider" => 5,
                _ => 1,
            })
        }
    }
}
