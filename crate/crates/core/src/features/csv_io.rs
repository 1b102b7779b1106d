//! Feature CSV files: one header row with the feature column names and an
//! optional trailing `Label` column, then one row per flow.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::matrix::FeatureMatrix;
use super::names::{feature_index, FEATURE_NAMES, N_FEATURES};
use crate::error::{Error, Result};

pub const LABEL_COLUMN: &str = "Label";

/// Writes every column (active or not) so the output stays column-complete.
pub fn write_feature_csv<W: Write>(writer: W, m: &FeatureMatrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header: Vec<&str> = m.names().iter().map(String::as_str).collect();
    if m.labels().is_some() {
        header.push(LABEL_COLUMN);
    }
    w.write_record(&header)?;
    for (i, row) in m.rows().iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
        if let Some(l) = m.labels() {
            rec.push(l[i].clone());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_feature_csv_file(path: impl AsRef<Path>, m: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::file(path, e))?;
    write_feature_csv(std::io::BufWriter::new(f), m)
}

/// Shortest round-trip decimal, no exponent (`2`, `-1`, `0.5`).
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        // normalizes -0
        "0".to_string()
    } else {
        format!("{v}")
    }
}

/// Reads a feature CSV.
///
/// If any header names a known flow feature (canonical or alias), the result
/// has the 77 flow columns in canonical order and unrelated columns such as
/// addresses or timestamps are ignored; a missing duplicate `Fwd Header Len.1`
/// is filled from `Fwd Header Len`. Otherwise every non-label column is read
/// as a numeric feature under its own name.
pub fn read_feature_csv<R: Read>(reader: R) -> Result<FeatureMatrix> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case(LABEL_COLUMN));

    let mut flow_cols: Vec<Option<usize>> = vec![None; N_FEATURES];
    for (c, h) in headers.iter().enumerate() {
        if Some(c) == label_col {
            continue;
        }
        if let Some(i) = feature_index(h) {
            flow_cols[i].get_or_insert(c);
        }
    }
    let flow_mode = flow_cols.iter().any(Option::is_some);
    let dup = feature_index("Fwd Header Len.1").unwrap();
    let base = feature_index("Fwd Header Len").unwrap();
    let (names, sources): (Vec<String>, Vec<usize>) = if flow_mode {
        if flow_cols[dup].is_none() {
            flow_cols[dup] = flow_cols[base];
        }
        let mut sources = Vec::with_capacity(N_FEATURES);
        for (i, c) in flow_cols.iter().enumerate() {
            match c {
                Some(c) => sources.push(*c),
                None => {
                    return Err(Error::invalid(format!(
                        "feature CSV is missing column `{}`",
                        FEATURE_NAMES[i]
                    )))
                }
            }
        }
        (FEATURE_NAMES.iter().map(|s| s.to_string()).collect(), sources)
    } else {
        headers
            .iter()
            .enumerate()
            .filter(|(c, _)| Some(*c) != label_col)
            .map(|(c, h)| (h.clone(), c))
            .unzip()
    };

    let mut rows = Vec::new();
    let mut labels = label_col.map(|_| Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = sources
            .iter()
            .map(|&c| {
                let cell = rec.get(c).unwrap_or("");
                cell.parse::<f64>().map_err(|_| {
                    Error::invalid(format!(
                        "row {}: column `{}` is not numeric: `{cell}`",
                        line + 2,
                        headers[c]
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
        if let (Some(l), Some(c)) = (labels.as_mut(), label_col) {
            l.push(rec.get(c).unwrap_or("").to_string());
        }
    }
    FeatureMatrix::new(names, rows, labels)
}

pub fn read_feature_csv_file(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::file(path, e))?;
    read_feature_csv(std::io::BufReader::new(f))
}
