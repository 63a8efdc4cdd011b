//! Dataset and prediction CSV formats.
//!
//! Datasets use the header `y,x1,...,xp` with one row per observation;
//! feature-only files drop the leading `y` column. Values are written with
//! the shortest decimal representation that parses back to the identical
//! float, so files round-trip exactly and reruns are byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{CliError, Result};

pub fn write_dataset(path: &Path, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        write!(w, "y")?;
        for j in 1..=x.ncols() {
            write!(w, ",x{j}")?;
        }
        writeln!(w)?;
        for i in 0..x.nrows() {
            write!(w, "{}", y[i])?;
            for j in 0..x.ncols() {
                write!(w, ",{}", x[(i, j)])?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    emit().map_err(|e| CliError::io(path, e))
}

pub fn write_latent(path: &Path, latent: &[(f64, f64)]) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "t,h")?;
        for (t, h) in latent {
            writeln!(w, "{t},{h}")?;
        }
        w.flush()
    };
    emit().map_err(|e| CliError::io(path, e))
}

pub fn write_predictions(path: &Path, mean: &[f64], lower: &[f64], upper: &[f64]) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "mean,lower,upper")?;
        for i in 0..mean.len() {
            writeln!(w, "{},{},{}", mean[i], lower[i], upper[i])?;
        }
        w.flush()
    };
    emit().map_err(|e| CliError::io(path, e))
}

/// A parsed dataset file: features always, response when the file has one.
pub struct LoadedData {
    pub x: DMatrix<f64>,
    pub y: Option<DVector<f64>>,
}

/// Reads `y,x1,...,xp` or `x1,...,xp` CSV into matrices.
pub fn read_dataset(path: &Path) -> Result<LoadedData> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?
        .clone();
    if headers.is_empty() {
        return Err(CliError::Parse(format!(
            "{}: empty header row",
            path.display()
        )));
    }
    let has_y = headers.get(0) == Some("y");
    let p = if has_y {
        headers.len() - 1
    } else {
        headers.len()
    };
    if p == 0 {
        return Err(CliError::Parse(format!(
            "{}: no feature columns",
            path.display()
        )));
    }

    let mut rows: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        if record.len() != headers.len() {
            return Err(CliError::Parse(format!(
                "{}: row {} has {} fields, header has {}",
                path.display(),
                line + 2,
                record.len(),
                headers.len()
            )));
        }
        let mut fields = record.iter();
        if has_y {
            let raw = fields.next().expect("checked length");
            ys.push(parse_field(path, line + 2, 1, raw)?);
        }
        for (col, raw) in fields.enumerate() {
            rows.push(parse_field(path, line + 2, col + 1 + usize::from(has_y), raw)?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(CliError::Parse(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok(LoadedData {
        x: DMatrix::from_row_slice(n, p, &rows),
        y: has_y.then(|| DVector::from_row_slice(&ys)),
    })
}

fn parse_field(path: &Path, row: usize, col: usize, raw: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| {
        CliError::Parse(format!(
            "{}: row {row}, column {col}: cannot parse {raw:?} as a number",
            path.display()
        ))
    })
}
