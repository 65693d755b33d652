//! Service layer: pipeline operations, background jobs, the JSON API and
//! configuration loading shared with the `coauthor` binary.

pub mod api;
pub mod app;
pub mod error;
pub mod jobs;

use std::path::Path;

use coauthor_core::config::Config;

pub use app::App;
pub use error::AppError;

/// Loads `path`, or the defaults when no file is given.
pub fn load_config(path: Option<&Path>) -> Result<Config, AppError> {
    Ok(match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    })
}
