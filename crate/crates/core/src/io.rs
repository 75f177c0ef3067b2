//! CSV ingestion and output.
//!
//! Data files hold one sample per row and one feature per column, with an
//! optional header row and an optional trailing integer label column.
//! A header is recognized when any field of the first row is not a number.
//! Kernel files are square numeric CSVs without labels.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::kernel::DataMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CsvData {
    pub data: DataMatrix,
    pub labels: Option<Vec<i64>>,
    pub header: Option<Vec<String>>,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

fn parse_rows<R: Read>(reader: R) -> Result<(Option<Vec<String>>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        rows.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }
    let header = match rows.first() {
        Some(first) if first.iter().any(|f| f.parse::<f64>().is_err()) => Some(rows.remove(0)),
        _ => None,
    };
    Ok((header, rows))
}

fn parse_value(field: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::Csv(format!("row {row}, column {col}: cannot parse {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::NonFinite { row, col });
    }
    Ok(v)
}

/// Reads a data CSV. With `labeled`, the last column is parsed as integer
/// labels and excluded from the features.
pub fn read_data<R: Read>(reader: R, labeled: bool) -> Result<CsvData> {
    let (header, rows) = parse_rows(reader)?;
    if rows.is_empty() {
        return Err(Error::Empty("CSV has no data rows"));
    }
    let width = rows[0].len();
    let m = if labeled { width.saturating_sub(1) } else { width };
    if m == 0 {
        return Err(Error::Empty("CSV has no feature columns"));
    }
    let n = rows.len();
    let mut values = Mat::<f64>::zeros(m, n);
    let mut labels = labeled.then(|| Vec::with_capacity(n));
    for (j, row) in rows.iter().enumerate() {
        for d in 0..m {
            values[(d, j)] = parse_value(&row[d], j, d)?;
        }
        if let Some(labels) = labels.as_mut() {
            let field = &row[m];
            let label = field.parse::<i64>().or_else(|_| {
                // accept integral floats such as "3.0"
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.fract() == 0.0 && v.abs() < 9.0e15)
                    .map(|v| v as i64)
                    .ok_or_else(|| Error::Csv(format!("row {j}: label {field:?} is not an integer")))
            })?;
            labels.push(label);
        }
    }
    Ok(CsvData {
        data: DataMatrix::new(values)?,
        labels,
        header,
    })
}

pub fn read_data_file(path: &Path, labeled: bool) -> Result<CsvData> {
    read_data(File::open(path)?, labeled)
}

/// Reads a square matrix CSV (header optional).
pub fn read_square<R: Read>(reader: R) -> Result<Mat<f64>> {
    let (_, rows) = parse_rows(reader)?;
    let n = rows.len();
    if n == 0 {
        return Err(Error::Empty("kernel CSV has no rows"));
    }
    if rows[0].len() != n {
        return Err(Error::NotSquare {
            rows: n,
            cols: rows[0].len(),
        });
    }
    let mut out = Mat::<f64>::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, field) in row.iter().enumerate() {
            out[(i, j)] = parse_value(field, i, j)?;
        }
    }
    Ok(out)
}

pub fn read_square_file(path: &Path) -> Result<Mat<f64>> {
    read_square(File::open(path)?)
}

fn fmt(v: f64) -> String {
    // shortest representation that parses back to the same value
    format!("{v:?}")
}

/// Writes samples as rows with a header `x0,..,x{m-1}[,label]`.
pub fn write_data<W: Write>(writer: W, data: &DataMatrix, labels: Option<&[i64]>) -> Result<()> {
    let x = data.values();
    if let Some(l) = labels {
        if l.len() != x.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} samples",
                l.len(),
                x.ncols()
            )));
        }
    }
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..x.nrows()).map(|d| format!("x{d}")).collect();
    if labels.is_some() {
        header.push("label".to_string());
    }
    wtr.write_record(&header).map_err(csv_err)?;
    for j in 0..x.ncols() {
        let mut rec: Vec<String> = (0..x.nrows()).map(|d| fmt(x[(d, j)])).collect();
        if let Some(l) = labels {
            rec.push(l[j].to_string());
        }
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes a matrix row by row without a header.
pub fn write_matrix<W: Write>(writer: W, m: MatRef<'_, f64>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for i in 0..m.nrows() {
        let rec: Vec<String> = (0..m.ncols()).map(|j| fmt(m[(i, j)])).collect();
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}
