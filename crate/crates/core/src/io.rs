//! CSV datasets: a header row, one `label` column with values 0/1, every
//! other column a numeric feature in header order.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::stats::LabeledDataset;

pub const LABEL_COLUMN: &str = "label";

/// A dataset together with its feature column names.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvDataset {
    pub feature_names: Vec<String>,
    pub data: LabeledDataset,
}

fn parse_error(origin: &str, line: u64, column: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        path: origin.to_string(),
        line: line as usize,
        column: column.to_string(),
        message: message.into(),
    }
}

struct Table {
    feature_names: Vec<String>,
    features: DMatrix<f64>,
    labels: Option<Vec<u8>>,
}

fn read_table<R: Read>(reader: R, origin: &str, require_label: bool) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_error(origin, 1, "", e.to_string()))?
        .clone();
    if headers.is_empty() {
        return Err(parse_error(origin, 1, "", "missing header row"));
    }
    let label_idx = headers.iter().position(|h| h == LABEL_COLUMN);
    if require_label && label_idx.is_none() {
        return Err(parse_error(origin, 1, "", "no column named 'label'"));
    }
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let p = feature_names.len();

    let mut values: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(origin, line, "", e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (i, cell) in record.iter().enumerate() {
            let name = &headers[i];
            if cell.is_empty() {
                return Err(parse_error(origin, line, name, "missing value"));
            }
            if Some(i) == label_idx {
                match cell.parse::<i64>() {
                    Ok(0) => labels.push(0u8),
                    Ok(1) => labels.push(1u8),
                    Ok(other) => {
                        return Err(parse_error(origin, line, name, format!("label {other} is not 0 or 1")))
                    }
                    Err(_) => return Err(parse_error(origin, line, name, format!("label '{cell}' is not an integer"))),
                }
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| parse_error(origin, line, name, format!("'{cell}' is not a number")))?;
                if !v.is_finite() {
                    return Err(parse_error(origin, line, name, "non-finite value"));
                }
                values.push(v);
            }
        }
    }
    let n = if label_idx.is_some() { labels.len() } else { values.len() / p };
    // values are row-major per sample, i.e. column-major for the p × n matrix
    let features = DMatrix::from_vec(p, n, values);
    Ok(Table {
        feature_names,
        features,
        labels: label_idx.map(|_| labels),
    })
}

pub fn read_dataset_from<R: Read>(reader: R, origin: &str) -> Result<CsvDataset> {
    let t = read_table(reader, origin, true)?;
    Ok(CsvDataset {
        feature_names: t.feature_names,
        data: LabeledDataset::new(t.features, t.labels.unwrap_or_default())?,
    })
}

/// Feature columns only; a `label` column, if present, is ignored.
pub fn read_features_from<R: Read>(reader: R, origin: &str) -> Result<(Vec<String>, DMatrix<f64>)> {
    let t = read_table(reader, origin, false)?;
    Ok((t.feature_names, t.features))
}

pub fn read_features(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_features_from(std::io::BufReader::new(file), &path.display().to_string())
}

pub fn read_dataset(path: &Path) -> Result<CsvDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_dataset_from(std::io::BufReader::new(file), &path.display().to_string())
}

/// Default feature names `x0, x1, …`.
pub fn default_feature_names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("x{i}")).collect()
}

/// Writes features first, then `label`. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn write_dataset<W: Write>(data: &LabeledDataset, names: &[String], out: W) -> Result<()> {
    if names.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: names.len(),
        });
    }
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
    header.push(LABEL_COLUMN);
    w.write_record(&header).map_err(io)?;
    for (j, col) in data.features().column_iter().enumerate() {
        let mut row: Vec<String> = col.iter().map(|v| v.to_string()).collect();
        row.push(data.labels()[j].to_string());
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_file(data: &LabeledDataset, names: &[String], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_dataset(data, names, std::io::BufWriter::new(file))
}
