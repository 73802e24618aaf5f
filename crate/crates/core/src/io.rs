//! File helpers: atomic writes and the matrix CSV format.
//!
//! Matrix CSV layout: a header row `id,<id_0>,...,<id_{m-1}>`, then one row per
//! matrix row starting with its id. Numbers use Rust's shortest round-trip
//! formatting so a read gives back the exact bits.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::Matrix;

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io { path: path.into(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn matrix_csv(row_ids: &[String], col_ids: &[String], m: &Matrix) -> String {
    assert_eq!(row_ids.len(), m.nrows());
    assert_eq!(col_ids.len(), m.ncols());
    let mut out = String::from("id");
    for id in col_ids {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for (r, id) in row_ids.iter().enumerate() {
        out.push_str(id);
        for c in 0..m.ncols() {
            out.push(',');
            out.push_str(&m[(r, c)].to_string());
        }
        out.push('\n');
    }
    out
}

/// Parses [`matrix_csv`] output back into `(row ids, col ids, matrix)`.
pub fn parse_matrix_csv(text: &str) -> Result<(Vec<String>, Vec<String>, Matrix)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
    let mut head = header.split(',');
    if head.next() != Some("id") {
        return Err(Error::Parse("CSV header must start with `id`".into()));
    }
    let col_ids: Vec<String> = head.map(str::to_owned).collect();
    let mut row_ids = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let mut fields = line.split(',');
        row_ids.push(fields.next().unwrap_or_default().to_owned());
        let row: Vec<f64> = fields
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 1))))
            .collect::<Result<_>>()?;
        if row.len() != col_ids.len() {
            return Err(Error::Parse(format!(
                "row {} has {} values, header has {}",
                lineno + 1,
                row.len(),
                col_ids.len()
            )));
        }
        values.extend(row);
    }
    let m = Matrix::from_row_slice(row_ids.len(), col_ids.len(), &values);
    Ok((row_ids, col_ids, m))
}

pub fn indexed_ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}
