use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the percentage-of-maximum-accuracy column is aggregated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PmaMode {
    /// Mean over datasets of `acc / row max`.
    #[default]
    RatioMean,
    /// Fraction of datasets where the method attains the row max.
    StrictCount,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub acc_mean: f64,
    /// Population standard deviation over datasets.
    pub acc_std: f64,
    /// Fraction of datasets within 95% of the row max, boundary included.
    pub p95: f64,
    pub pma: f64,
    /// Mean rank over datasets; 1 is best, ties averaged.
    pub friedman_rank: f64,
}

/// Accuracies closer than this are the same value reached through a
/// different summation order.
pub const TIE_TOL: f64 = 1e-12;

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Ranks of one row, 1 for the highest value, ties sharing the mean rank.
pub fn average_ranks(row: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
    let mut ranks = vec![0.0; row.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && tied(row[order[end]], row[order[start]]) {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

/// Column aggregates of a `datasets x methods` accuracy table.
pub fn compute_metrics(methods: &[String], table: &[Vec<f64>], pma: PmaMode) -> Result<Vec<MethodSummary>> {
    if table.is_empty() || methods.is_empty() {
        return Err(Error::InvalidInput("empty accuracy table".into()));
    }
    let m = methods.len();
    if let Some(r) = table.iter().position(|row| row.len() != m) {
        return Err(Error::Shape(format!("row {r} has {} entries, expected {m}", table[r].len())));
    }
    if table.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("accuracy table has missing entries".into()));
    }
    let d = table.len() as f64;
    let maxima: Vec<f64> = table
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let ranks: Vec<Vec<f64>> = table.iter().map(|row| average_ranks(row)).collect();

    Ok((0..m)
        .map(|j| {
            let col: Vec<f64> = table.iter().map(|row| row[j]).collect();
            let mean = col.iter().sum::<f64>() / d;
            let var = col.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / d;
            let p95 = col.iter().zip(&maxima).filter(|(a, mx)| **a >= 0.95 * **mx || tied(**a, 0.95 * **mx)).count() as f64 / d;
            let pma = match pma {
                PmaMode::RatioMean => {
                    col.iter()
                        .zip(&maxima)
                        .map(|(a, mx)| if *mx > 0.0 { a / mx } else { 1.0 })
                        .sum::<f64>()
                        / d
                }
                PmaMode::StrictCount => col.iter().zip(&maxima).filter(|(a, mx)| tied(**a, **mx)).count() as f64 / d,
            };
            MethodSummary {
                method: methods[j].clone(),
                acc_mean: mean,
                acc_std: var.sqrt(),
                p95,
                pma,
                friedman_rank: ranks.iter().map(|r| r[j]).sum::<f64>() / d,
            }
        })
        .collect())
}
