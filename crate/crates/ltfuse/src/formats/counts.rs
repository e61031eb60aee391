//! Per-class count CSV: `class,count`.

use std::io::{Read, Write};
use std::path::Path;

use ltfuse_core::longtail::ClassCounts;

use super::{csv_error, split, write_file};
use crate::error::{Error, Result};

pub fn write_counts_csv<W: Write>(c: &ClassCounts, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["class", "count"])?;
    for (y, n) in c.as_slice().iter().enumerate() {
        out.write_record([y.to_string(), n.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_counts_csv<R: Read>(r: R) -> std::result::Result<ClassCounts, String> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut counts = Vec::new();
    for (i, rec) in rdr.deserialize::<(usize, usize)>().enumerate() {
        let (y, n) = rec.map_err(|e| format!("row {i}: {e}"))?;
        if y != i {
            return Err(format!("row {i}: classes must be listed as 0..k-1 in order (found {y})"));
        }
        counts.push(n);
    }
    ClassCounts::new(counts).map_err(|e| e.to_string())
}

pub fn save_counts(c: &ClassCounts, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_counts_csv(c, &mut buf).map_err(|e| csv_error(path, e))?;
    write_file(path, &buf)
}

/// Training counts from a split manifest (`.json`) or a count CSV.
pub fn load_counts(path: &Path) -> Result<ClassCounts> {
    if path.extension().is_some_and(|e| e == "json") {
        let m: split::SplitManifest = super::load_json(path)?;
        return Ok(ClassCounts::new(m.train_counts)?);
    }
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_counts_csv(f).map_err(|m| Error::in_file(path, m))
}
