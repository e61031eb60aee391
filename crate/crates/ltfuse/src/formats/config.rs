use std::path::Path;

use ltfuse_core::training::ExperimentConfig;

use super::read_text;
use crate::error::{Error, Result};

/// Parses an experiment config, then lists every schema violation with its
/// field path.
pub fn parse_config(text: &str) -> std::result::Result<ExperimentConfig, Vec<String>> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let p = e.path().to_string();
        vec![format!("{p}: {}", e.into_inner())]
    })?;
    let v = cfg.violations();
    if v.is_empty() {
        Ok(cfg)
    } else {
        Err(v)
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&read_text(path)?).map_err(|v| {
        Error::Usage(format!("invalid config {}:\n  {}", path.display(), v.join("\n  ")))
    })
}
