//! Fixtures shared by the benchmarks.

use rntk_core::harness::{rbf_kernel, synthetic_data};
use rntk_core::Matrix;

/// Binary problem on Gaussian points: RBF Gram and labels from the sign of
/// the first two features' sum.
pub fn rbf_problem(n: usize, dim: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let x = synthetic_data(n, dim, seed);
    let mut labels: Vec<f64> = x
        .row_iter()
        .map(|r| if r[0] + r.get(1).copied().unwrap_or(0.0) >= 0.0 { 1.0 } else { -1.0 })
        .collect();
    labels[0] = 1.0;
    labels[1] = -1.0;
    (rbf_kernel(&x, &x, 1.0 / dim as f64), labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_has_both_classes() {
        let (g, y) = rbf_problem(10, 3, 0);
        assert_eq!(g.shape(), (10, 10));
        assert!(y.contains(&1.0) && y.contains(&-1.0));
    }
}
