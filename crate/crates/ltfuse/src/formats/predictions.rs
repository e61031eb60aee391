//! Prediction CSV: header `sample_id,label,p_0,...,p_{k-1}`, one row per
//! sample. Floats use the shortest representation that reads back exactly.

use std::io::{Read, Write};
use std::path::Path;

use ltfuse_core::experts::PredictionMatrix;

use super::{csv_error, write_file};
use crate::error::{Error, Result};

/// Largest accepted deviation of a loaded row sum from 1.
pub const LOAD_ROW_TOL: f64 = 1e-6;

pub fn write_predictions<W: Write>(m: &PredictionMatrix, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["sample_id".to_string(), "label".to_string()];
    header.extend((0..m.k()).map(|j| format!("p_{j}")));
    out.write_record(&header)?;
    let mut rec = Vec::with_capacity(m.k() + 2);
    for r in 0..m.n() {
        rec.clear();
        rec.push(m.ids()[r].to_string());
        rec.push(m.labels()[r].to_string());
        rec.extend(m.row(r).iter().map(f64::to_string));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a prediction CSV. Errors name the offending data row (0-based).
pub fn read_predictions<R: Read>(r: R) -> std::result::Result<PredictionMatrix, String> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(r);
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    if header.len() < 3 || &header[0] != "sample_id" || &header[1] != "label" {
        return Err("header must be sample_id,label,p_0,...".into());
    }
    for (j, name) in header.iter().skip(2).enumerate() {
        if name != format!("p_{j}") {
            return Err(format!("header column {}: expected p_{j}, found {name}", j + 2));
        }
    }
    let k = header.len() - 2;
    let (mut ids, mut labels, mut probs) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format!("row {i}: {e}"))?;
        if rec.len() != k + 2 {
            return Err(format!("row {i}: header declares k={k} but the row has {} probabilities", rec.len() as isize - 2));
        }
        ids.push(rec[0].parse::<u64>().map_err(|e| format!("row {i}: sample_id: {e}"))?);
        let label = rec[1].parse::<usize>().map_err(|e| format!("row {i}: label: {e}"))?;
        if label >= k {
            return Err(format!("row {i}: label {label} out of range for k={k}"));
        }
        labels.push(label);
        let mut sum = 0.0;
        for (j, f) in rec.iter().skip(2).enumerate() {
            let p: f64 = f.parse().map_err(|e| format!("row {i}: p_{j}: {e}"))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("row {i}: p_{j} = {p} outside [0, 1]"));
            }
            sum += p;
            probs.push(p);
        }
        if (sum - 1.0).abs() > LOAD_ROW_TOL {
            return Err(format!("row {i}: probabilities sum to {sum}"));
        }
    }
    if ids.is_empty() {
        return Err("no prediction rows".into());
    }
    PredictionMatrix::with_tolerance(k, ids, labels, probs, LOAD_ROW_TOL).map_err(|e| e.to_string())
}

pub fn save_predictions(m: &PredictionMatrix, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_predictions(m, &mut buf).map_err(|e| csv_error(path, e))?;
    write_file(path, &buf)
}

pub fn load_predictions(path: &Path) -> Result<PredictionMatrix> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_predictions(std::io::BufReader::new(f)).map_err(|m| Error::in_file(path, m))
}

/// `sample_id,label` rows, returned in file order.
pub fn load_labels(path: &Path) -> Result<Vec<(u64, usize)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<(u64, usize)>().enumerate() {
        out.push(rec.map_err(|e| Error::in_file(path, format!("row {i}: {e}")))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> std::result::Result<PredictionMatrix, String> {
        read_predictions(s.as_bytes())
    }

    #[test]
    fn round_trip_is_exact() {
        let m = PredictionMatrix::new(3, vec![4, 9], vec![0, 2], vec![0.1, 0.2, 0.7, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])
            .unwrap();
        let mut buf = Vec::new();
        write_predictions(&m, &mut buf).unwrap();
        assert_eq!(read_predictions(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn bad_row_sum_names_the_row() {
        let e = parse("sample_id,label,p_0,p_1\n0,0,0.5,0.5\n1,1,0.4,0.4\n").unwrap_err();
        assert!(e.starts_with("row 1:"), "{e}");
    }

    #[test]
    fn column_count_must_match_header() {
        let e = parse("sample_id,label,p_0,p_1,p_2\n0,0,0.25,0.25,0.25,0.25\n").unwrap_err();
        assert!(e.contains("k=3"), "{e}");
    }

    #[test]
    fn malformed_values_are_rejected() {
        assert!(parse("sample_id,label,p_0,p_1\n0,0,x,0.5\n").is_err());
        assert!(parse("sample_id,label,p_0,p_1\n0,5,0.5,0.5\n").is_err());
        assert!(parse("id,label,p_0\n0,0,1\n").is_err());
        assert!(parse("sample_id,label,p_0,p_1\n").is_err());
    }
}
