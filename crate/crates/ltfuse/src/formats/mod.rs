//! On-disk formats. Every writer has a loader that reads its output back
//! without loss.

mod checkpoint;
mod config;
mod counts;
mod metrics;
mod predictions;
mod split;

pub use checkpoint::{Checkpoint, FusionBlocks, NamedBlock, CHECKPOINT_VERSION};
pub use config::{load_config, parse_config};
pub use counts::{load_counts, read_counts_csv, save_counts, write_counts_csv};
pub use metrics::{
    class_confidence, load_class_confidence, load_confusion, load_reliability, save_class_confidence,
    save_confusion, save_reliability, ClassConfidence,
};
pub use predictions::{load_labels, load_predictions, read_predictions, save_predictions, write_predictions, LOAD_ROW_TOL};
pub use split::{load_features, load_split, save_split, SplitManifest, SPLIT_VERSION};

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_file(path, to_json(value)?.as_bytes())
}

/// Deserialises JSON, reporting the field path of the first error.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let p = e.path().to_string();
        Error::in_file(path, format!("{p}: {}", e.into_inner()))
    })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        k => Error::in_file(path, format!("{k:?}")),
    }
}

/// Empty field for `None`.
pub(crate) fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub(crate) fn parse_opt(s: &str) -> std::result::Result<Option<f64>, std::num::ParseFloatError> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}
