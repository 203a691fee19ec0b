use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::smo::{smo_train_with, DualModel, SmoConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// One-vs-one ensemble of binary models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiClassModel {
    /// Sorted distinct training labels.
    pub labels: Vec<i64>,
    /// One model per unordered label pair `(a, b)` with `a < b`; a positive
    /// decision votes for `a`.
    pub models: Vec<DualModel>,
    pub n_train: usize,
}

/// Trains all pairwise models. A single training class yields a model that
/// always predicts it.
pub fn train_multiclass(gram: &Matrix, labels: &[i64], cfg: &SmoConfig) -> Result<MultiClassModel> {
    let n = labels.len();
    if gram.shape() != (n, n) {
        return Err(Error::Shape(format!(
            "gram is {:?}, expected {n}x{n}",
            gram.shape()
        )));
    }
    if n == 0 {
        return Err(Error::Shape("no training points".into()));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();

    let mut pairs = Vec::new();
    for (k, &a) in classes.iter().enumerate() {
        for &b in &classes[k + 1..] {
            pairs.push((a, b));
        }
    }
    let models = pairs
        .into_par_iter()
        .map(|(a, b)| {
            let idx: Vec<usize> = (0..n).filter(|&i| labels[i] == a || labels[i] == b).collect();
            let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == a { 1.0 } else { -1.0 }).collect();
            let sub = gram.select(&idx, &idx);
            let mut model = smo_train_with(&sub, &y, cfg)?;
            model.support_indices = model.support_indices.iter().map(|&k| idx[k]).collect();
            model.class_pair = (a, b);
            Ok(model)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiClassModel {
        labels: classes,
        models,
        n_train: n,
    })
}

/// Index of the most-voted label; ties go to the smallest label.
pub fn vote<I: IntoIterator<Item = i64>>(labels: &[i64], ballots: I) -> i64 {
    let mut counts = vec![0usize; labels.len()];
    for b in ballots {
        if let Ok(k) = labels.binary_search(&b) {
            counts[k] += 1;
        }
    }
    let mut best = 0;
    for k in 1..counts.len() {
        if counts[k] > counts[best] {
            best = k;
        }
    }
    labels[best]
}

impl MultiClassModel {
    /// Predicts one label per row of `cross` (test x train kernel values).
    pub fn predict(&self, cross: &Matrix) -> Result<Vec<i64>> {
        if cross.cols() != self.n_train {
            return Err(Error::Shape(format!(
                "kernel rows have {} columns, model was trained on {} points",
                cross.cols(),
                self.n_train
            )));
        }
        Ok(cross
            .row_iter()
            .map(|row| {
                if self.labels.len() == 1 {
                    return self.labels[0];
                }
                vote(
                    &self.labels,
                    self.models.iter().map(|m| {
                        if m.decision(row) >= 0.0 {
                            m.class_pair.0
                        } else {
                            m.class_pair.1
                        }
                    }),
                )
            })
            .collect())
    }
}

/// Free-function form of [`MultiClassModel::predict`].
pub fn predict(model: &MultiClassModel, cross: &Matrix) -> Result<Vec<i64>> {
    model.predict(cross)
}
