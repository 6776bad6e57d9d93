//! UCI optical digits: 64 integer pixels in `0..=16` then a label in `0..=9`,
//! comma separated, no header. Features are scaled to `[0, 1]` by `/16`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{io_err, DataError, Dataset, TaskKind};
use crate::model::Targets;

const PIXELS: usize = 64;
const MAX_PIXEL: f64 = 16.0;
const CLASSES: usize = 10;

pub fn load_digits_csv(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| DataError::Parse { path: path.to_path_buf(), line: line_no, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != PIXELS + 1 {
            return Err(parse_err(format!("expected {} fields, found {}", PIXELS + 1, fields.len())));
        }
        let mut values = Vec::with_capacity(PIXELS + 1);
        for (col, f) in fields.iter().enumerate() {
            let v: i64 = f
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("column {}: `{f}` is not an integer", col + 1)))?;
            values.push(v);
        }
        let label = values[PIXELS];
        if !(0..CLASSES as i64).contains(&label) {
            return Err(DataError::Validation {
                path: path.to_path_buf(),
                message: format!("line {line_no}: label {label} outside 0..=9"),
            });
        }
        if let Some(bad) = values[..PIXELS].iter().find(|&&v| !(0..=16).contains(&v)) {
            return Err(DataError::Validation {
                path: path.to_path_buf(),
                message: format!("line {line_no}: pixel {bad} outside 0..=16"),
            });
        }
        pixels.extend(values[..PIXELS].iter().map(|&v| v as f64 / MAX_PIXEL));
        labels.push(label as usize);
    }
    if labels.is_empty() {
        return Err(DataError::Empty { path: path.to_path_buf() });
    }
    let features = Array2::from_shape_vec((labels.len(), PIXELS), pixels).expect("row-major pixels");
    Ok(Dataset::new(features, Targets::Classes(labels), TaskKind::Classification { num_classes: CLASSES })?)
}

/// Writes a digits dataset back to the UCI format (pixels `×16`, rounded).
pub fn write_digits_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let Targets::Classes(labels) = ds.targets() else {
        return Err(DataError::Validation { path: path.to_path_buf(), message: "digits need class targets".into() });
    };
    if ds.num_features() != PIXELS {
        return Err(DataError::Validation { path: path.to_path_buf(), message: "digits need 64 features".into() });
    }
    let mut out = String::new();
    for (row, label) in ds.features().rows().into_iter().zip(labels) {
        for x in row {
            write!(out, "{},", (x * MAX_PIXEL).round() as i64).unwrap();
        }
        writeln!(out, "{label}").unwrap();
    }
    fs::write(path, out).map_err(io_err(path))
}
