//! Fusion checkpoint (JSON): configuration, training counts and every
//! parameter block by name, in layout order.

use std::path::Path;

use ltfuse_core::fusion::{FusionConfig, FusionModel, FusionParams, MixtureGate};
use ltfuse_core::longtail::ClassCounts;
use ltfuse_core::training::TrainReport;
use serde::{Deserialize, Serialize};

use super::{load_json, save_json};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedBlock {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionBlocks {
    pub config: FusionConfig,
    pub blocks: Vec<NamedBlock>,
}

impl FusionBlocks {
    pub fn from_params(config: FusionConfig, params: &FusionParams) -> Self {
        let blocks = params
            .layout
            .blocks()
            .into_iter()
            .filter(|(_, r)| !r.is_empty())
            .map(|(name, r)| NamedBlock { name: name.to_string(), values: params.block(&r).to_vec() })
            .collect();
        Self { config, blocks }
    }

    /// Rebuilds the model for `counts`; every block must match the layout.
    pub fn restore(&self, counts: &ClassCounts) -> std::result::Result<(FusionModel, FusionParams), String> {
        let model = FusionModel::new(self.config, counts).map_err(|e| e.to_string())?;
        let expected: Vec<_> = model.layout().blocks().into_iter().filter(|(_, r)| !r.is_empty()).collect();
        if expected.len() != self.blocks.len() {
            return Err(format!("expected {} parameter blocks, found {}", expected.len(), self.blocks.len()));
        }
        let mut values = Vec::with_capacity(model.layout().len);
        for ((name, r), b) in expected.iter().zip(&self.blocks) {
            if b.name != *name {
                return Err(format!("expected block {name}, found {}", b.name));
            }
            if b.values.len() != r.len() {
                return Err(format!("block {name}: expected {} values, found {}", r.len(), b.values.len()));
            }
            values.extend_from_slice(&b.values);
        }
        let params = FusionParams::from_values(model.layout().clone(), values).map_err(|e| e.to_string())?;
        Ok((model, params))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub k: usize,
    /// Training counts the module was trained with.
    pub counts: Vec<usize>,
    /// `dragon` or `smdragon`.
    pub variant: String,
    pub fusion: FusionBlocks,
    #[serde(default)]
    pub per_class: Option<FusionBlocks>,
    #[serde(default)]
    pub mixture_gate: Option<MixtureGate>,
}

impl Checkpoint {
    pub fn from_report(r: &TrainReport) -> Result<Self> {
        let (_, params) = r.fusion()?;
        let (_, pc) = r.per_class_fusion()?;
        Ok(Self {
            format_version: CHECKPOINT_VERSION,
            k: r.k,
            counts: r.counts.as_slice().to_vec(),
            variant: if r.best_config.single_modality { "smdragon" } else { "dragon" }.into(),
            fusion: FusionBlocks::from_params(r.best_config, &params),
            per_class: Some(FusionBlocks::from_params(r.per_class_config, &pc)),
            mixture_gate: r.mixture_gate.clone(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_json(self, path)
    }

    /// Loads and checks version, class count and every block shape.
    pub fn load(path: &Path) -> Result<Self> {
        let c: Checkpoint = load_json(path)?;
        if c.format_version != CHECKPOINT_VERSION {
            return Err(Error::in_file(path, format!("unsupported checkpoint version {}", c.format_version)));
        }
        if c.counts.len() != c.k {
            return Err(Error::in_file(path, format!("k = {} but {} counts", c.k, c.counts.len())));
        }
        let counts = ClassCounts::new(c.counts.clone())?;
        c.fusion.restore(&counts).map_err(|m| Error::in_file(path, m))?;
        if let Some(pc) = &c.per_class {
            pc.restore(&counts).map_err(|m| Error::in_file(path, format!("per_class: {m}")))?;
        }
        Ok(c)
    }
}
