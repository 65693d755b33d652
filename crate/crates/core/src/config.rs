//! Top-level TOML configuration.
//!
//! Every section and key is optional. Relative paths are resolved against the
//! directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compressor::CompressorConfig;
use crate::generator::GenerationConfig;
use crate::ingest::IngestConfig;
use crate::linker::{IndexConfig, LinkerConfig};
use crate::metrics::correction::Normalization;
use crate::prompts::{PromptError, PromptSet};
use crate::providers::ProvidersConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Validation(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StoreConfig {
    pub root: PathBuf,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self { root: PathBuf::from("coauthor-data") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub normalization: Normalization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApiConfig {
    pub bind: String,
    /// Background job workers.
    pub workers: usize,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self { bind: "127.0.0.1:8080".into(), workers: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptsConfig {
    /// Directory holding `compression.txt` and `generation.txt`; built-in
    /// templates are used when unset.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub store: StoreConfig,
    pub ingest: IngestConfig,
    pub providers: ProvidersConfig,
    pub index: IndexConfig,
    pub compressor: CompressorConfig,
    pub generator: GenerationConfig,
    pub linker: LinkerConfig,
    pub metrics: MetricsConfig,
    pub api: ApiConfig,
    pub prompts: PromptsConfig,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl Config {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: Config =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        resolve(base, &mut cfg.store.root);
        for p in [
            cfg.ingest.abbreviations.as_mut(),
            cfg.providers.cache_dir.as_mut(),
            cfg.compressor.cache_dir.as_mut(),
            cfg.prompts.dir.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, p);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Validation(m.into()));
        if self.ingest.window == 0 || self.ingest.overlap >= self.ingest.window {
            return bad("ingest.overlap must be smaller than ingest.window, which must be positive");
        }
        if self.generator.batch_limit == 0 {
            return bad("generator.batch_limit must be at least 1");
        }
        if !(self.compressor.part_fraction > 0.0 && self.compressor.part_fraction <= 1.0) {
            return bad("compressor.part_fraction must lie in (0, 1]");
        }
        if self.compressor.context_budget_tokens == 0 {
            return bad("compressor.context_budget_tokens must be positive");
        }
        if !self.linker.threshold.is_finite() || self.linker.top_k == 0 {
            return bad("linker.threshold must be finite and linker.top_k positive");
        }
        if self.index.nlist == Some(0) || self.index.nprobe == Some(0) {
            return bad("index.nlist and index.nprobe must be positive");
        }
        Ok(())
    }

    pub fn prompt_set(&self) -> Result<PromptSet, ConfigError> {
        Ok(match &self.prompts.dir {
            Some(dir) => PromptSet::load_dir(dir)?,
            None => PromptSet::builtin(),
        })
    }
}
