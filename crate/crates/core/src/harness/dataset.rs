use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Minimum size for a four-fold split with nonempty training folds.
pub const MIN_POINTS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    /// N x T, one sequence per row.
    pub features: Matrix,
    /// Codes `0..classes.len()`.
    pub labels: Vec<i64>,
    /// Original label for each code, ascending.
    pub classes: Vec<i64>,
}

impl Dataset {
    pub fn n_points(&self) -> usize {
        self.features.rows()
    }

    pub fn length(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Builds a dataset from raw labels, coding them contiguously.
    pub fn new(name: impl Into<String>, features: Matrix, raw_labels: &[i64]) -> Result<Self> {
        if features.rows() != raw_labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.rows(),
                raw_labels.len()
            )));
        }
        if let Some(bad) = features.as_slice().iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite feature {bad}")));
        }
        let mut classes = raw_labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        let labels = raw_labels
            .iter()
            .map(|l| classes.binary_search(l).unwrap() as i64)
            .collect();
        Ok(Self {
            name: name.into(),
            features,
            labels,
            classes,
        })
    }

    /// Errors unless the dataset supports the four-fold protocol.
    pub fn check_protocol_size(&self) -> Result<()> {
        if self.n_points() < MIN_POINTS {
            return Err(Error::InvalidInput(format!(
                "dataset {} has {} points, need at least {MIN_POINTS}",
                self.name,
                self.n_points()
            )));
        }
        Ok(())
    }
}

fn parse_label(cell: &str) -> Option<i64> {
    if let Ok(v) = cell.parse::<i64>() {
        return Some(v);
    }
    let v = cell.parse::<f64>().ok()?;
    (v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
}

/// Parses headerless CSV: numeric features, integer label in the last
/// column. Rows and columns in errors are 1-based.
pub fn read_dataset<R: Read>(name: &str, reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if record.len() < 2 {
            return Err(Error::Parse {
                row,
                column: record.len(),
                message: "missing label column".into(),
            });
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    row,
                    column: record.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", record.len()),
                })
            }
            _ => {}
        }
        let last = record.len() - 1;
        for (c, cell) in record.iter().take(last).enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: c + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: c + 1,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            values.push(v);
        }
        let cell = &record[last];
        labels.push(parse_label(cell).ok_or_else(|| Error::Parse {
            row,
            column: last + 1,
            message: format!("label is not an integer: {cell:?}"),
        })?);
    }
    let Some(width) = width else {
        return Err(Error::Parse {
            row: 0,
            column: 0,
            message: "empty file".into(),
        });
    };
    let features = Matrix::from_vec(labels.len(), width - 1, values)?;
    Dataset::new(name, features, &labels)
}

/// Loads a dataset named after the file stem.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_dataset(&name, std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset> {
        read_dataset("t", s.as_bytes())
    }

    #[test]
    fn three_rows() {
        let d = parse("1.0,2.0,0\n3.0,4.0,1\n5.0,6.0,0").unwrap();
        assert_eq!(d.features.shape(), (3, 2));
        assert_eq!(d.labels, vec![0, 1, 0]);
        assert_eq!(d.features.row(2), &[5.0, 6.0]);
    }

    #[test]
    fn labels_are_recoded() {
        let d = parse("0.5,7\n0.1,-2\n0.2,7\n").unwrap();
        assert_eq!(d.classes, vec![-2, 7]);
        assert_eq!(d.labels, vec![1, 0, 1]);
    }

    #[test]
    fn empty_file() {
        assert!(matches!(parse(""), Err(Error::Parse { .. })));
    }

    #[test]
    fn nan_names_the_cell() {
        match parse("1,2,0\n3,NaN,1\n") {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_and_non_numeric() {
        assert!(matches!(parse("1,2,0\n3,1\n"), Err(Error::Parse { row: 2, .. })));
        assert!(matches!(parse("1,x,0\n"), Err(Error::Parse { row: 1, column: 2, .. })));
        assert!(matches!(parse("1,2,0.5\n"), Err(Error::Parse { row: 1, column: 3, .. })));
        assert!(matches!(parse("1\n"), Err(Error::Parse { row: 1, .. })));
    }

    #[test]
    fn protocol_size() {
        let d = parse("1,0\n2,1\n").unwrap();
        assert!(d.check_protocol_size().is_err());
    }
}
