//! Plain-text matrix files: a `rows cols` header followed by the entries in
//! row-major order, 17 significant digits each.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn format_matrix(w: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(24 * w.len() + 32);
    let _ = writeln!(out, "{} {}", w.nrows(), w.ncols());
    for i in 0..w.nrows() {
        let row: Vec<String> = (0..w.ncols()).map(|j| format!("{:.16e}", w[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut tokens = text.split_whitespace();
    let mut dim = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("missing {what} in matrix header")))?
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("bad {what}: {e}")))
    };
    let rows = dim("rows")?;
    let cols = dim("cols")?;
    let values: Vec<f64> = tokens
        .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("bad entry `{t}`: {e}"))))
        .collect::<Result<_>>()?;
    if values.len() != rows * cols {
        return Err(Error::Parse(format!("expected {} entries for {rows}x{cols}, found {}", rows * cols, values.len())));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn write_matrix(path: &Path, w: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, format_matrix(w))?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

/// Vectors are stored as `n 1` column matrices.
pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    write_matrix(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(Error::Parse(format!("expected a column vector, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(DVector::from_column_slice(m.as_slice()))
}
