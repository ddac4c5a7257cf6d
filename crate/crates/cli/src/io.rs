//! CSV matrix and label files.
//!
//! Files hold one sample per row; internally samples are columns.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use ratecode::DataMatrix;

use crate::error::CliError;

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

fn reader<R: Read>(source: R, header: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source)
}

/// Parses rows of numbers; `path` only labels error messages.
pub fn parse_rows<R: Read>(source: R, header: bool, path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader(source, header).records() {
        let record = record.map_err(|e| CliError::Parse {
            path: path.display().to_string(),
            row: e.position().map_or(0, |p| p.line() as usize),
            column: 0,
            message: e.to_string(),
        })?;
        let row = record.position().map_or(rows.len() + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::Parse {
                        path: path.display().to_string(),
                        row,
                        column: c + 1,
                        message: format!("'{cell}' is not a finite number"),
                    })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if let Some(first) = rows.first() {
            if values.len() != first.len() {
                return Err(CliError::Parse {
                    path: path.display().to_string(),
                    row,
                    column: values.len().min(first.len()) + 1,
                    message: format!("expected {} fields, found {}", first.len(), values.len()),
                });
            }
        }
        rows.push(values);
    }
    Ok(rows)
}

/// Reads a sample-per-row CSV into an `n × m` matrix.
pub fn read_matrix<R: Read>(source: R, header: bool, path: &Path) -> Result<DataMatrix, CliError> {
    let rows = parse_rows(source, header, path)?;
    if rows.is_empty() {
        return Err(ratecode::Error::InvalidInput(format!("{} has no data rows", path.display())).into());
    }
    let (m, n) = (rows.len(), rows[0].len());
    Ok(DataMatrix::new(DMatrix::from_fn(n, m, |i, j| rows[j][i]))?)
}

pub fn load_matrix(path: &Path, header: bool) -> Result<DataMatrix, CliError> {
    read_matrix(open(path)?, header, path)
}

fn write_rows(path: &Path, rows: impl Iterator<Item = Vec<String>>, header: Option<&[&str]>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut emit = |line: String| writeln!(out, "{line}").map_err(|e| CliError::io(path, e));
    if let Some(h) = header {
        emit(h.join(","))?;
    }
    for row in rows {
        emit(row.join(","))?;
    }
    out.flush().map_err(|e| CliError::io(path, e))
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

/// Writes one sample per row.
pub fn save_matrix(path: &Path, w: &DataMatrix) -> Result<(), CliError> {
    let m = w.as_matrix();
    write_rows(
        path,
        m.column_iter().map(|c| c.iter().map(|&v| format_float(v)).collect()),
        None,
    )
}

pub fn load_labels(path: &Path, header: bool) -> Result<Vec<usize>, CliError> {
    let mut labels = Vec::new();
    for record in reader(open(path)?, header).records() {
        let record = record.map_err(|e| CliError::Parse {
            path: path.display().to_string(),
            row: e.position().map_or(0, |p| p.line() as usize),
            column: 0,
            message: e.to_string(),
        })?;
        let row = record.position().map_or(labels.len() + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 1 {
            return Err(CliError::Parse {
                path: path.display().to_string(),
                row,
                column: 2,
                message: format!("expected one label per row, found {} fields", record.len()),
            });
        }
        labels.push(record[0].parse::<usize>().map_err(|_| CliError::Parse {
            path: path.display().to_string(),
            row,
            column: 1,
            message: format!("'{}' is not a non-negative integer label", &record[0]),
        })?);
    }
    Ok(labels)
}

pub fn save_labels(path: &Path, labels: &[usize]) -> Result<(), CliError> {
    write_rows(path, labels.iter().map(|l| vec![l.to_string()]), None)
}

/// Two-column `x,y` plot data.
pub fn save_curve(path: &Path, points: &[(f64, f64)]) -> Result<(), CliError> {
    write_rows(
        path,
        points.iter().map(|&(x, y)| vec![format_float(x), format_float(y)]),
        Some(&["x", "y"]),
    )
}

/// Soft membership: one row per sample, one column per class.
pub fn load_membership(path: &Path, header: bool) -> Result<ratecode::mcr2::Membership, CliError> {
    let rows = parse_rows(open(path)?, header, path)?;
    if rows.is_empty() {
        return Err(ratecode::Error::InvalidInput(format!("{} has no data rows", path.display())).into());
    }
    let k = rows[0].len();
    let weights = (0..k).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    Ok(ratecode::mcr2::Membership::new(weights)?)
}
