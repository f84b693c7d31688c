//! Everything that touches files: CSV ingestion, splits, standardization,
//! synthetic data and model persistence.

mod model_io;
mod split;
mod standardize;
mod synth;

pub use model_io::{load_model, save_model, SavedModel, SCHEMA_VERSION};
pub use split::{make_split, SplitData, SplitPlan};
pub use standardize::Standardizer;
pub use synth::{synth_generate, Field, SyntheticData, SyntheticSpec, Truth};

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Numeric table with one designated target column.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub x: DenseMatrix,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, target_name: String, x: DenseMatrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.rows(),
                right: y.len(),
            });
        }
        if feature_names.len() != x.cols() {
            return Err(Error::dims(x.cols(), feature_names.len()));
        }
        Ok(Self {
            feature_names,
            target_name,
            x,
            y,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            x: self.x.select_rows(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// Drops rows (features and target together) identical to an earlier row,
    /// compared bit for bit.
    pub fn dedup(&self) -> Self {
        let mut seen = HashSet::new();
        let keep: Vec<usize> = (0..self.n())
            .filter(|&i| {
                let key: Vec<u64> = self
                    .x
                    .row(i)
                    .iter()
                    .chain(std::iter::once(&self.y[i]))
                    .map(|v| v.to_bits())
                    .collect();
                seen.insert(key)
            })
            .collect();
        self.select(&keep)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::CorruptFile(format!("{}: {other:?}", path.display())),
    }
}

/// Reads a headed numeric CSV, removing duplicate rows.
///
/// `row` in parse errors is the 1-based line number, counting the header.
pub fn load_csv(path: &Path, target_column: &str) -> Result<Dataset> {
    let (header, rows) = read_table(path)?;
    let target = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::MissingTarget(target_column.to_string()))?;
    let d = header.len() - 1;
    let mut x = Vec::with_capacity(rows.len() * d);
    let mut y = Vec::with_capacity(rows.len());
    for row in &rows {
        for (j, v) in row.iter().enumerate() {
            if j == target {
                y.push(*v);
            } else {
                x.push(*v);
            }
        }
    }
    let feature_names = header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != target)
        .map(|(_, h)| h.clone())
        .collect();
    let x = DenseMatrix::from_row_major(y.len(), d, x)?;
    let ds = Dataset::new(feature_names, target_column.to_string(), x, y)?;
    let deduped = ds.dedup();
    if deduped.n() < ds.n() {
        log::info!("{}: removed {} duplicate rows", path.display(), ds.n() - deduped.n());
    }
    Ok(deduped)
}

/// Reads a headed numeric CSV without any target handling.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            row: line,
            column: String::new(),
            message: e.to_string(),
        })?;
        let mut values = Vec::with_capacity(header.len());
        for (j, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| Error::Parse {
                row: line,
                column: header[j].clone(),
                message: format!("not a number: {field:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: header[j].clone(),
                    message: format!("non-finite value {field:?}"),
                });
            }
            values.push(value);
        }
        rows.push(values);
    }
    Ok((header, rows))
}

/// Writes a headed CSV; `columns` are the table's columns.
pub fn write_columns(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let n = columns.first().map_or(0, |c| c.len());
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::LengthMismatch {
            left: n,
            right: c.len(),
        });
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for i in 0..n {
        let rec: Vec<String> = columns.iter().map(|c| format!("{:?}", c[i])).collect();
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes features then target under their original names.
pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let mut header: Vec<&str> = ds.feature_names.iter().map(String::as_str).collect();
    header.push(&ds.target_name);
    let cols: Vec<Vec<f64>> = (0..ds.d()).map(|j| ds.x.col(j)).collect();
    let mut refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    refs.push(&ds.y);
    write_columns(path, &header, &refs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn duplicate_rows_collapse() {
        let f = write("a,b,y\n1,2,3\n1,2,3\n4,5,6\n");
        let ds = load_csv(f.path(), "y").unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.y, vec![3.0, 6.0]);
    }

    #[test]
    fn three_rows_two_features() {
        let f = write("a,y,b\n1,10,2\n3,11,4\n5,12,6\n");
        let ds = load_csv(f.path(), "y").unwrap();
        assert_eq!((ds.n(), ds.d()), (3, 2));
        assert_eq!(ds.feature_names, vec!["a", "b"]);
        assert_eq!(ds.x.row(1), &[3.0, 4.0]);
        assert_eq!(ds.y, vec![10.0, 11.0, 12.0]);
    }

    #[test]
    fn parse_error_names_row_and_column() {
        let f = write("a,y\n1,2\n3,oops\n");
        match load_csv(f.path(), "y").unwrap_err() {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "y");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn missing_target_is_reported() {
        let f = write("a,b\n1,2\n");
        assert!(matches!(load_csv(f.path(), "y"), Err(Error::MissingTarget(_))));
    }

    #[test]
    fn dedup_is_idempotent() {
        let f = write("a,y\n1,2\n1,2\n0,2\n1,2\n");
        let ds = load_csv(f.path(), "y").unwrap();
        assert_eq!(ds.dedup(), ds);
    }
}
