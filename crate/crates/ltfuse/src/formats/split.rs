//! Split manifest (JSON) plus a companion feature CSV
//! `sample_id,label,x_0,...,x_{dim-1}`.

use std::collections::HashMap;
use std::path::Path;

use ltfuse_core::longtail::{ClassCounts, DatasetSplit, FrequencyProfile, Partition, SampleRecord};
use serde::{Deserialize, Serialize};

use super::{csv_error, load_json, save_json, write_file};
use crate::error::{Error, Result};

pub const SPLIT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Partitions {
    pub train: Vec<(u64, usize)>,
    pub holdout: Vec<(u64, usize)>,
    pub validation: Vec<(u64, usize)>,
    pub test: Vec<(u64, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitManifest {
    pub format_version: u32,
    pub k: usize,
    pub dim: usize,
    pub profile: Option<FrequencyProfile>,
    pub seed: u64,
    pub val_fraction: f64,
    pub requested: Vec<usize>,
    /// Train plus hold-out counts per class.
    pub train_counts: Vec<usize>,
    pub truncated: bool,
    pub val_per_class: usize,
    /// Feature CSV, relative to the manifest's directory.
    pub features: Option<String>,
    /// `(sample_id, label)` pairs per partition.
    pub partitions: Partitions,
}

impl SplitManifest {
    pub fn from_split(split: &DatasetSplit, features: Option<String>) -> Self {
        let mut parts = Partitions { train: vec![], holdout: vec![], validation: vec![], test: vec![] };
        for (s, p) in split.samples.iter().zip(&split.partitions) {
            let list = match p {
                Partition::Train => &mut parts.train,
                Partition::Holdout => &mut parts.holdout,
                Partition::Validation => &mut parts.validation,
                Partition::Test => &mut parts.test,
            };
            list.push((s.id, s.label));
        }
        let dim = split.samples.iter().find_map(|s| s.features.as_ref().map(Vec::len)).unwrap_or(0);
        SplitManifest {
            format_version: SPLIT_VERSION,
            k: split.k,
            dim,
            profile: split.profile.clone(),
            seed: split.seed,
            val_fraction: split.val_fraction,
            requested: split.requested.as_slice().to_vec(),
            train_counts: split.train_counts().as_slice().to_vec(),
            truncated: split.truncated,
            val_per_class: split.val_per_class,
            features,
            partitions: parts,
        }
    }
}

/// Writes `manifest` and, when samples carry features, `features` next to it.
pub fn save_split(split: &DatasetSplit, manifest: &Path, features: &str) -> Result<()> {
    let has_features = split.samples.iter().any(|s| s.features.is_some());
    if has_features {
        let path = manifest.parent().unwrap_or(Path::new("")).join(features);
        let dim = split.samples.iter().find_map(|s| s.features.as_ref().map(Vec::len)).unwrap_or(0);
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["sample_id".to_string(), "label".to_string()];
        header.extend((0..dim).map(|j| format!("x_{j}")));
        w.write_record(&header).map_err(|e| csv_error(&path, e))?;
        for s in &split.samples {
            let x = s.features.as_ref().ok_or_else(|| Error::Data(format!("sample {} has no features", s.id)))?;
            let mut rec = vec![s.id.to_string(), s.label.to_string()];
            rec.extend(x.iter().map(f64::to_string));
            w.write_record(&rec).map_err(|e| csv_error(&path, e))?;
        }
        let buf = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        write_file(&path, &buf)?;
    }
    let m = SplitManifest::from_split(split, has_features.then(|| features.to_string()));
    save_json(&m, manifest)
}

/// Feature CSV rows by sample id: `(label, features)`.
pub fn load_features(path: &Path) -> Result<HashMap<u64, (usize, Vec<f64>)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::in_file(path, format!("row {i}: {e}")))?;
        let bad = |m: String| Error::in_file(path, format!("row {i}: {m}"));
        let id: u64 = rec.get(0).unwrap_or("").parse().map_err(|e| bad(format!("sample_id: {e}")))?;
        let label: usize = rec.get(1).unwrap_or("").parse().map_err(|e| bad(format!("label: {e}")))?;
        let x = rec.iter().skip(2).map(str::parse).collect::<std::result::Result<Vec<f64>, _>>().map_err(|e| bad(e.to_string()))?;
        out.insert(id, (label, x));
    }
    Ok(out)
}

/// Rebuilds the split, with features when the manifest names a feature file.
pub fn load_split(path: &Path) -> Result<DatasetSplit> {
    let m: SplitManifest = load_json(path)?;
    if m.format_version != SPLIT_VERSION {
        return Err(Error::in_file(path, format!("unsupported split format version {}", m.format_version)));
    }
    let features = match &m.features {
        Some(f) => Some(load_features(&path.parent().map(Path::to_path_buf).unwrap_or_default().join(f))?),
        None => None,
    };
    let p = &m.partitions;
    let mut rows: Vec<(u64, usize, Partition)> = Vec::new();
    for (list, part) in [
        (&p.train, Partition::Train),
        (&p.holdout, Partition::Holdout),
        (&p.validation, Partition::Validation),
        (&p.test, Partition::Test),
    ] {
        rows.extend(list.iter().map(|&(id, y)| (id, y, part)));
    }
    rows.sort_by_key(|r| r.0);
    if rows.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::in_file(path, "a sample id appears in more than one partition"));
    }
    let mut samples = Vec::with_capacity(rows.len());
    let mut partitions = Vec::with_capacity(rows.len());
    for (id, label, part) in rows {
        if label >= m.k {
            return Err(Error::in_file(path, format!("sample {id}: label {label} out of range")));
        }
        let x = match &features {
            Some(f) => {
                let (l, x) = f.get(&id).ok_or_else(|| Error::in_file(path, format!("sample {id} missing from features")))?;
                if *l != label {
                    return Err(Error::in_file(path, format!("sample {id}: label differs from feature file")));
                }
                Some(x.clone())
            }
            None => None,
        };
        samples.push(SampleRecord { id, label, features: x });
        partitions.push(part);
    }
    let split = DatasetSplit {
        k: m.k,
        profile: m.profile,
        seed: m.seed,
        val_fraction: m.val_fraction,
        requested: ClassCounts::new(m.requested)?,
        truncated: m.truncated,
        val_per_class: m.val_per_class,
        samples,
        partitions,
    };
    if split.train_counts().as_slice() != m.train_counts.as_slice() {
        return Err(Error::in_file(path, "train_counts disagree with the train and hold-out partitions"));
    }
    Ok(split)
}
