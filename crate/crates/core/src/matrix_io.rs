//! Plain CSV for dense matrices. Values are written with the shortest
//! representation that parses back to the same `f64`, so a write/read pair
//! is lossless.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{invalid, LspieError, Result};

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> LspieError + '_ {
    move |source| LspieError::Csv {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_matrix_csv(
    path: impl AsRef<Path>,
    matrix: &DMatrix<f64>,
    header: Option<&[String]>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_error(path))?;
    if let Some(h) = header {
        w.write_record(h).map_err(csv_error(path))?;
    }
    let mut record = Vec::with_capacity(matrix.ncols());
    for row in matrix.row_iter() {
        record.clear();
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record).map_err(csv_error(path))?;
    }
    w.flush().map_err(|source| LspieError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_matrix_csv(path: impl AsRef<Path>, has_header: bool) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .from_path(path)
        .map_err(csv_error(path))?;
    let mut values = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for rec in r.records() {
        let rec = rec.map_err(csv_error(path))?;
        if *ncols.get_or_insert(rec.len()) != rec.len() {
            return invalid(format!("{}: ragged row {nrows}", path.display()));
        }
        for field in rec.iter() {
            values.push(field.trim().parse::<f64>().map_err(|e| {
                LspieError::InvalidArgument(format!(
                    "{}: bad number `{field}` in row {nrows}: {e}",
                    path.display()
                ))
            })?);
        }
        nrows += 1;
    }
    Ok(DMatrix::from_row_slice(nrows, ncols.unwrap_or(0), &values))
}
