//! Binary C-SVM dual solved by sequential minimal optimization on a
//! precomputed kernel.
//!
//! Minimizes `1/2 a^T Q a - e^T a` subject to `y^T a = 0`, `0 <= a <= C`,
//! with `Q_ij = y_i y_j K_ij`. Each iteration updates the maximal violating
//! pair analytically; the loop stops when the pair's violation drops below
//! `tol`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 10_000_000;

/// Floor for the curvature of a non-PSD pair.
const TAU: f64 = 1e-12;

/// Eigenvalues above `-NON_PSD_TOL * trace / N` count as round-off.
pub const NON_PSD_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoConfig {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl SmoConfig {
    pub fn new(c: f64) -> Self {
        Self {
            c,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// A trained binary classifier in dual form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualModel {
    /// Training indices with nonzero dual variables.
    pub support_indices: Vec<usize>,
    /// `alpha_i * y_i` for each support index.
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    /// Labels predicted for positive and negative decision values.
    pub class_pair: (i64, i64),
    pub iterations: usize,
    /// Dual objective `e^T a - 1/2 a^T Q a` at the solution.
    pub objective: f64,
    /// Maximal KKT violation at exit.
    pub kkt_gap: f64,
}

impl DualModel {
    /// `sum_i alpha_i y_i K(x, x_i) + bias`, with `kernel_row` indexed by
    /// training point.
    pub fn decision(&self, kernel_row: &[f64]) -> f64 {
        self.support_indices
            .iter()
            .zip(&self.alphas)
            .map(|(&i, a)| a * kernel_row[i])
            .sum::<f64>()
            + self.bias
    }

    /// Full-length unsigned dual vector over `n` training points.
    pub fn dual_vector(&self, n: usize) -> Vec<f64> {
        let mut alpha = vec![0.0; n];
        for (&i, a) in self.support_indices.iter().zip(&self.alphas) {
            alpha[i] = a.abs();
        }
        alpha
    }
}

fn check_problem(gram: &Matrix, labels: &[f64], c: f64) -> Result<()> {
    let n = labels.len();
    if gram.shape() != (n, n) {
        return Err(Error::Shape(format!(
            "gram is {:?}, expected {n}x{n}",
            gram.shape()
        )));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidInput(format!("C must be positive, got {c}")));
    }
    if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(Error::InvalidInput(format!("labels must be +1 or -1, got {bad}")));
    }
    let positives = labels.iter().filter(|&&y| y > 0.0).count();
    if positives == 0 || positives == n {
        return Err(Error::Degenerate("labels contain a single class".into()));
    }
    Ok(())
}

/// Dual objective `e^T a - 1/2 a^T Q a` (to be maximized).
pub fn dual_objective(gram: &Matrix, labels: &[f64], alpha: &[f64]) -> f64 {
    let n = labels.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        let row = gram.row(i);
        let mut s = 0.0;
        for j in 0..n {
            s += alpha[j] * labels[j] * row[j];
        }
        quad += alpha[i] * labels[i] * s;
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Largest violation `max_{I_up} -y G - min_{I_low} -y G` of the KKT
/// conditions at `alpha`.
pub fn kkt_violation(gram: &Matrix, labels: &[f64], alpha: &[f64], c: f64) -> f64 {
    let n = labels.len();
    let mut up = f64::NEG_INFINITY;
    let mut low = f64::INFINITY;
    for t in 0..n {
        let row = gram.row(t);
        let g: f64 = (0..n).map(|k| labels[t] * labels[k] * row[k] * alpha[k]).sum::<f64>() - 1.0;
        let v = -labels[t] * g;
        if in_up(labels[t], alpha[t], c) {
            up = up.max(v);
        }
        if in_low(labels[t], alpha[t], c) {
            low = low.min(v);
        }
    }
    (up - low).max(0.0)
}

#[inline]
fn in_up(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

#[inline]
fn in_low(y: f64, a: f64, c: f64) -> bool {
    (y < 0.0 && a < c) || (y > 0.0 && a > 0.0)
}

struct Solution {
    alpha: Vec<f64>,
    grad: Vec<f64>,
    iterations: usize,
    gap: f64,
}

fn solve(gram: &Matrix, y: &[f64], cfg: &SmoConfig) -> Result<Solution> {
    let n = y.len();
    let c = cfg.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let diag: Vec<f64> = (0..n).map(|i| gram[(i, i)]).collect();

    for iter in 0..cfg.max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(y[t], alpha[t], c) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(y[t], alpha[t], c) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        let gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap < cfg.tol {
            return Ok(Solution {
                alpha,
                grad,
                iterations: iter,
                gap: gap.max(0.0),
            });
        }

        let ki = gram.row(i);
        let kj = gram.row(j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (diag[i] + diag[j] + 2.0 * y[i] * y[j] * ki[j]).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (diag[i] + diag[j] - 2.0 * ki[j]).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for k in 0..n {
            grad[k] += y[k] * (y[i] * ki[k] * di + y[j] * kj[k] * dj);
        }
    }
    Err(Error::NotConverged(cfg.max_iter))
}

fn offset(y: &[f64], alpha: &[f64], grad: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Trains a binary C-SVM; `labels` are `+1` / `-1`.
pub fn smo_train(gram: &Matrix, labels: &[f64], c: f64, tol: f64) -> Result<DualModel> {
    smo_train_with(gram, labels, &SmoConfig { tol, ..SmoConfig::new(c) })
}

pub fn smo_train_with(gram: &Matrix, labels: &[f64], cfg: &SmoConfig) -> Result<DualModel> {
    check_problem(gram, labels, cfg.c)?;
    let sol = match solve(gram, labels, cfg) {
        Err(Error::NotConverged(iters)) => {
            // a stalled solve on a noticeably indefinite Gram is retried with diagonal jitter
            let n = labels.len();
            let lambda = gram.min_eigenvalue();
            if lambda >= -NON_PSD_TOL * gram.trace().abs() / n as f64 {
                return Err(Error::NotConverged(iters));
            }
            warn!("gram has eigenvalue {lambda:.3e}; adding {:.3e} to the diagonal", -lambda);
            let mut jittered = gram.clone();
            for i in 0..n {
                jittered[(i, i)] -= lambda;
            }
            solve(&jittered, labels, cfg)?
        }
        other => other?,
    };
    let rho = offset(labels, &sol.alpha, &sol.grad, cfg.c);
    let objective = -sol
        .alpha
        .iter()
        .zip(&sol.grad)
        .map(|(a, g)| 0.5 * a * (g - 1.0))
        .sum::<f64>();
    let (support_indices, alphas) = sol
        .alpha
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0.0)
        .map(|(i, &a)| (i, a * labels[i]))
        .unzip();
    Ok(DualModel {
        support_indices,
        alphas,
        bias: -rho,
        c: cfg.c,
        class_pair: (1, -1),
        iterations: sol.iterations,
        objective,
        kkt_gap: sol.gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_hand_solution() {
        let m = smo_train(&Matrix::identity(2), &[1.0, -1.0], 1e6, 1e-6).unwrap();
        assert_eq!(m.support_indices, vec![0, 1]);
        assert!((m.alphas[0] - 1.0).abs() < 1e-9);
        assert!((m.alphas[1] + 1.0).abs() < 1e-9);
        assert!(m.bias.abs() < 1e-9);
        assert!((m.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn box_constraint_binds_for_small_c() {
        let m = smo_train(&Matrix::identity(2), &[1.0, -1.0], 0.25, 1e-9).unwrap();
        assert!(m.alphas.iter().all(|a| (a.abs() - 0.25).abs() < 1e-12));
    }

    #[test]
    fn single_class_is_degenerate() {
        let err = smo_train(&Matrix::identity(3), &[1.0, 1.0, 1.0], 1.0, 1e-3);
        assert!(matches!(err, Err(Error::Degenerate(_))));
    }

    #[test]
    fn invalid_arguments() {
        let g = Matrix::identity(2);
        assert!(matches!(smo_train(&g, &[1.0, 0.0], 1.0, 1e-3), Err(Error::InvalidInput(_))));
        assert!(matches!(smo_train(&g, &[1.0, -1.0], 0.0, 1e-3), Err(Error::InvalidInput(_))));
        assert!(matches!(smo_train(&g, &[1.0, -1.0, 1.0], 1.0, 1e-3), Err(Error::Shape(_))));
    }

    #[test]
    fn equality_constraint_holds() {
        let x: [f64; 7] = [-2.0, -1.0, -0.5, 0.4, 1.5, 2.5, 0.1];
        let y = [-1.0, -1.0, 1.0, -1.0, 1.0, 1.0, 1.0];
        let n = x.len();
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = (-(x[i] - x[j]) * (x[i] - x[j])).exp();
            }
        }
        let m = smo_train(&g, &y, 10.0, 1e-6).unwrap();
        let s: f64 = m.alphas.iter().sum();
        assert!(s.abs() < 1e-8);
        assert!(m.alphas.iter().all(|a| a.abs() <= 10.0));
        let alpha = m.dual_vector(n);
        assert!(kkt_violation(&g, &y, &alpha, 10.0) < 1e-6);
        assert!((dual_objective(&g, &y, &alpha) - m.objective).abs() < 1e-9);
    }
}
