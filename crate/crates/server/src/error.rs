use std::path::PathBuf;

use coauthor_core::compressor::CompressorError;
use coauthor_core::config::ConfigError;
use coauthor_core::generator::GeneratorError;
use coauthor_core::ingest::IngestError;
use coauthor_core::linker::LinkerError;
use coauthor_core::metrics::MetricsError;
use coauthor_core::providers::ProviderError;
use coauthor_core::store::StoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Compressor(#[from] CompressorError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Linker(#[from] LinkerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AppError {
    /// Stable machine-readable error class, used in API error bodies.
    pub fn kind(&self) -> &'static str {
        use AppError as E;
        match self {
            E::NotFound(_) | E::Store(StoreError::NotFound { .. }) | E::Ingest(IngestError::NotFound(_)) => "not_found",
            E::Conflict(_) | E::Store(StoreError::Conflict(_)) => "conflict",
            E::Validation(_)
            | E::Store(StoreError::Validation(_))
            | E::Ingest(IngestError::Validation(_) | IngestError::EmptyDocument(_))
            | E::Compressor(CompressorError::Validation(_) | CompressorError::Budget(_))
            | E::Generator(GeneratorError::Validation(_))
            | E::Linker(LinkerError::Validation(_))
            | E::Metrics(MetricsError::Validation(_))
            | E::Provider(ProviderError::Validation(_))
            | E::Config(_) => "validation",
            E::Metrics(MetricsError::UndefinedRate(_)) => "undefined_rate",
            E::Provider(_)
            | E::Compressor(CompressorError::Provider { .. } | CompressorError::BatchFailed(_))
            | E::Generator(GeneratorError::Provider(_))
            | E::Linker(LinkerError::Provider(_))
            | E::Metrics(MetricsError::Provider(_))
            | E::Ingest(IngestError::Conversion { .. }) => "provider",
            E::Store(StoreError::Integrity { .. }) | E::Linker(LinkerError::Integrity { .. }) => "integrity",
            _ => "internal",
        }
    }

    pub fn http_status(&self) -> u16 {
        match self.kind() {
            "not_found" => 404,
            "conflict" => 409,
            "validation" | "undefined_rate" => 422,
            "provider" => 502,
            _ => 500,
        }
    }
}
