//! Files: Matrix Market matrices, the JSON model manifest, the on-disk FRF
//! cache and CSV/JSON reports.

pub mod cache;
pub mod manifest;
pub mod mtx;
pub mod report;

pub use cache::{CacheStats, FrfCache};
pub use manifest::{load_manifest, save_manifest, export_model, LoadedManifest, ModelManifest, FrequencySpec, OperatingPointSpec};

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    MatrixMarket { path: PathBuf, message: String },
    #[error("{path}:{line}:{column}: invalid JSON: {message}")]
    Json {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {} problem(s):\n  {}", errors.len(), errors.join("\n  "))]
    Validation { path: PathBuf, errors: Vec<String> },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
}

impl IoError {
    pub fn is_numerical(&self) -> bool {
        false
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let wrap = |source| IoError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(wrap)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(wrap)?;
    tmp.write_all(bytes).map_err(wrap)?;
    tmp.flush().map_err(wrap)?;
    tmp.persist(path).map_err(|e| wrap(e.error))?;
    Ok(())
}
