//! Engine for outline-driven long-form scientific writing: reference ingestion,
//! per-document compression, batched section generation with citation marks,
//! sentence-level citation tracing over an IVF-SQ8 vector index, and the
//! evaluation metrics used to score structure and content.

pub mod ann;
pub mod compressor;
pub mod config;
pub mod generator;
pub mod ingest;
pub mod linker;
pub mod metrics;
pub mod prompts;
pub mod providers;
pub mod store;
pub mod synthetic;
