//! CSV exports of reliability bins, the confusion matrix and the per-class
//! confidence curve, with their loaders.

use std::path::Path;

use ltfuse_core::longtail::ClassCounts;
use ltfuse_core::math::argmax;
use ltfuse_core::metrics::{ConfusionMatrix, ReliabilityBin};
use serde::{Deserialize, Serialize};

use super::{csv_error, opt, parse_opt, write_file};
use crate::error::{Error, Result};

fn finish(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<()> {
    let buf = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    write_file(path, &buf)
}

fn records(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    rdr.records().collect::<csv::Result<Vec<_>>>().map_err(|e| csv_error(path, e))
}

fn field<T: std::str::FromStr>(path: &Path, row: usize, rec: &csv::StringRecord, i: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    rec.get(i)
        .ok_or_else(|| Error::in_file(path, format!("row {row}: missing column {i}")))?
        .parse()
        .map_err(|e| Error::in_file(path, format!("row {row}: column {i}: {e}")))
}

fn opt_field(path: &Path, row: usize, rec: &csv::StringRecord, i: usize) -> Result<Option<f64>> {
    parse_opt(rec.get(i).unwrap_or("")).map_err(|e| Error::in_file(path, format!("row {row}: column {i}: {e}")))
}

/// `bin,lower,upper,count,mean_confidence,accuracy`; empty bins leave the
/// last two fields blank.
pub fn save_reliability(bins: &[ReliabilityBin], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let e = |e| csv_error(path, e);
    w.write_record(["bin", "lower", "upper", "count", "mean_confidence", "accuracy"]).map_err(e)?;
    for (i, b) in bins.iter().enumerate() {
        w.write_record([
            i.to_string(),
            b.lower.to_string(),
            b.upper.to_string(),
            b.count.to_string(),
            opt(b.mean_confidence),
            opt(b.accuracy),
        ])
        .map_err(e)?;
    }
    finish(path, w)
}

pub fn load_reliability(path: &Path) -> Result<Vec<ReliabilityBin>> {
    records(path)?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(ReliabilityBin {
                lower: field(path, i, r, 1)?,
                upper: field(path, i, r, 2)?,
                count: field(path, i, r, 3)?,
                mean_confidence: opt_field(path, i, r, 4)?,
                accuracy: opt_field(path, i, r, 5)?,
            })
        })
        .collect()
}

/// Rows and columns ordered head to tail. Header `true_class,<class ids>`;
/// each row starts with its class id.
pub fn save_confusion(cm: &ConfusionMatrix, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let e = |e| csv_error(path, e);
    let mut header = vec!["true_class".to_string()];
    header.extend(cm.order.iter().map(usize::to_string));
    w.write_record(&header).map_err(e)?;
    for (c, row) in cm.order.iter().zip(&cm.counts) {
        let mut rec = vec![c.to_string()];
        rec.extend(row.iter().map(usize::to_string));
        w.write_record(&rec).map_err(e)?;
    }
    finish(path, w)
}

pub fn load_confusion(path: &Path) -> Result<ConfusionMatrix> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let order = header
        .iter()
        .skip(1)
        .map(str::parse)
        .collect::<std::result::Result<Vec<usize>, _>>()
        .map_err(|e| Error::in_file(path, format!("header: {e}")))?;
    let mut counts = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let c: usize = field(path, i, &rec, 0)?;
        if order.get(i) != Some(&c) {
            return Err(Error::in_file(path, format!("row {i}: class {c} out of order")));
        }
        let row = (1..=order.len()).map(|j| field(path, i, &rec, j)).collect::<Result<Vec<usize>>>()?;
        counts.push(row);
    }
    if counts.len() != order.len() {
        return Err(Error::in_file(path, "confusion matrix is not square"));
    }
    Ok(ConfusionMatrix { order, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassConfidence {
    pub class: usize,
    pub train_count: usize,
    pub eval_count: usize,
    /// Mean normalised score of the true class.
    pub mean_confidence: Option<f64>,
    pub accuracy: Option<f64>,
}

/// Per-class mean true-class confidence and accuracy, sorted head to tail.
pub fn class_confidence<R: AsRef<[f64]>>(rows: &[R], truth: &[usize], counts: &ClassCounts) -> Vec<ClassConfidence> {
    let k = counts.k();
    let mut conf = vec![0.0; k];
    let mut hits = vec![0usize; k];
    let mut n = vec![0usize; k];
    for (r, &y) in rows.iter().zip(truth) {
        let r = r.as_ref();
        let total: f64 = r.iter().sum();
        if total > 0.0 {
            conf[y] += r[y] / total;
        }
        hits[y] += usize::from(argmax(r) == y);
        n[y] += 1;
    }
    counts
        .order_by_count_desc()
        .into_iter()
        .map(|y| ClassConfidence {
            class: y,
            train_count: counts.get(y),
            eval_count: n[y],
            mean_confidence: (n[y] > 0).then(|| conf[y] / n[y] as f64),
            accuracy: (n[y] > 0).then(|| hits[y] as f64 / n[y] as f64),
        })
        .collect()
}

/// `class,train_count,eval_count,mean_confidence,accuracy`.
pub fn save_class_confidence(rows: &[ClassConfidence], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let e = |e| csv_error(path, e);
    w.write_record(["class", "train_count", "eval_count", "mean_confidence", "accuracy"]).map_err(e)?;
    for c in rows {
        w.write_record([
            c.class.to_string(),
            c.train_count.to_string(),
            c.eval_count.to_string(),
            opt(c.mean_confidence),
            opt(c.accuracy),
        ])
        .map_err(e)?;
    }
    finish(path, w)
}

pub fn load_class_confidence(path: &Path) -> Result<Vec<ClassConfidence>> {
    records(path)?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(ClassConfidence {
                class: field(path, i, r, 0)?,
                train_count: field(path, i, r, 1)?,
                eval_count: field(path, i, r, 2)?,
                mean_confidence: opt_field(path, i, r, 3)?,
                accuracy: opt_field(path, i, r, 4)?,
            })
        })
        .collect()
}
