//! Delimited numeric tables with a header row and one target column.

use std::path::Path;

use ndarray::Array2;

use super::{DataError, Dataset, TaskKind};
use crate::model::Targets;

/// Which column holds the regression target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetColumn {
    Index(usize),
    Name(String),
}

fn csv_err(path: &Path, e: csv::Error) -> DataError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => DataError::Io { path: path.to_path_buf(), source },
        kind => DataError::Parse { path: path.to_path_buf(), line, message: format!("{kind:?}") },
    }
}

/// Every column must be numeric. The target column becomes a single output;
/// the remaining columns, in file order, are the features.
pub fn load_csv_regression(
    path: impl AsRef<Path>,
    delimiter: u8,
    target: TargetColumn,
) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let target_idx = match &target {
        TargetColumn::Index(i) if *i < headers.len() => *i,
        TargetColumn::Index(i) => {
            return Err(DataError::Validation {
                path: path.to_path_buf(),
                message: format!("target column {i} but only {} columns", headers.len()),
            })
        }
        TargetColumn::Name(name) => headers.iter().position(|h| h == name).ok_or_else(|| DataError::Validation {
            path: path.to_path_buf(),
            message: format!("no column named `{name}`"),
        })?,
    };
    let width = headers.len();
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        for (col, field) in record.iter().enumerate() {
            let x: f64 = field.parse().map_err(|_| DataError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("column {} (`{}`): `{field}` is not a number", col + 1, &headers[col]),
            })?;
            if col == target_idx {
                targets.push(x);
            } else {
                features.push(x);
            }
        }
    }
    if targets.is_empty() {
        return Err(DataError::Empty { path: path.to_path_buf() });
    }
    let n = targets.len();
    let features = Array2::from_shape_vec((n, width - 1), features).expect("equal-width records");
    let targets = Array2::from_shape_vec((n, 1), targets).expect("one target per row");
    Ok(Dataset::new(features, Targets::Values(targets), TaskKind::Regression)?)
}

/// UCI wine quality: `;`-separated, target `quality`.
pub fn load_wine(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    load_csv_regression(path, b';', TargetColumn::Name("quality".into()))
}

/// CASP protein structure: `,`-separated, target `RMSD` in the first column.
pub fn load_casp(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    load_csv_regression(path, b',', TargetColumn::Name("RMSD".into()))
}

/// Writes `ds` with `feature_names` as header, inserting the target column
/// named `target_name` at position `target_index`.
pub fn write_csv_regression(
    ds: &Dataset,
    path: impl AsRef<Path>,
    delimiter: u8,
    feature_names: &[&str],
    target_name: &str,
    target_index: usize,
) -> Result<(), DataError> {
    let path = path.as_ref();
    let Targets::Values(values) = ds.targets() else {
        return Err(DataError::Validation { path: path.to_path_buf(), message: "regression needs value targets".into() });
    };
    if feature_names.len() != ds.num_features() || values.ncols() != 1 || target_index > feature_names.len() {
        return Err(DataError::Validation { path: path.to_path_buf(), message: "header does not match dataset".into() });
    }
    let mut writer = csv::WriterBuilder::new().delimiter(delimiter).from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header: Vec<&str> = feature_names.to_vec();
    header.insert(target_index, target_name);
    writer.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (row, t) in ds.features().rows().into_iter().zip(values.column(0)) {
        let mut fields: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        fields.insert(target_index, format!("{t:?}"));
        writer.write_record(&fields).map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}
