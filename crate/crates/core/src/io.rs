//! Headerless CSV matrices: one observation per row, decimal floats.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::from_rows;

/// Parse a headerless numeric CSV; errors name the offending row (0-based).
pub fn read_matrix<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Io(e.to_string()).at_row(row))?;
        let values = rec
            .iter()
            .enumerate()
            .map(|(col, field)| match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Config(format!("column {col}: '{field}' is not a finite number")).at_row(row)),
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = out.first() {
            if values.len() != first.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    got: values.len(),
                }
                .at_row(row));
            }
        }
        out.push(values);
    }
    if out.is_empty() {
        return Err(Error::Config("data file has no rows".into()));
    }
    let d = out[0].len();
    Ok(from_rows(&out, d))
}

pub fn read_matrix_path(path: &Path) -> Result<DMatrix<f64>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_matrix(file)
}

/// Write rows with the shortest round-tripping decimal form.
pub fn write_matrix<W: Write>(m: &DMatrix<f64>, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for r in 0..m.nrows() {
        w.write_record(m.row(r).iter().map(|v| v.to_string()))
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn matrix_to_string(m: &DMatrix<f64>) -> Result<String> {
    let mut buf = Vec::new();
    write_matrix(m, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}
