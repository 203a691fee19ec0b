//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rntk_core::oracle::{forward, gradient, NetworkWeights};
use rntk_core::{HyperParams, Matrix, Variant};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn gaussian_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Hyperparameters drawn from the ranges the benchmark grid spans.
pub fn random_params(rng: &mut ChaCha8Rng, max_depth: usize) -> HyperParams {
    HyperParams::new(
        rng.random_range(0.5..2.0),
        rng.random_range(0.1..1.5),
        rng.random_range(0.0..0.5),
        rng.random_range(0.5..1.5),
        rng.random_range(1..=max_depth),
    )
    .unwrap()
}

/// Largest relative gap between backpropagated and central-difference
/// partial derivatives over every parameter, with the denominator floored
/// at `floor` so exactly-zero partials compare absolutely.
pub fn gradient_check(variant: Variant, depth: usize, steps: usize, width: usize, seed: u64, h: f64, floor: f64) -> f64 {
    let params = HyperParams::new(2f64.sqrt(), 0.5, 0.1, 1.0, depth).unwrap();
    let mut r = rng(seed);
    let x = gaussian_vec(steps, &mut r);
    let mut net = NetworkWeights::sample(width, depth, steps, seed).unwrap();
    let analytic = gradient(&net, &params, &x, variant).unwrap().flatten(&params);
    assert_eq!(analytic.len(), net.param_count());
    let mut worst: f64 = 0.0;
    for (k, g) in analytic.iter().enumerate() {
        let orig = net.param(k);
        net.set_param(k, orig + h);
        let up = forward(&net, &params, &x, variant).unwrap().value;
        net.set_param(k, orig - h);
        let down = forward(&net, &params, &x, variant).unwrap().value;
        net.set_param(k, orig);
        let fd = (up - down) / (2.0 * h);
        let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(floor);
        worst = worst.max(rel);
    }
    worst
}

/// Random 30-point binary problem with an RBF Gram.
pub fn rbf_problem(n: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let mut r = rng(seed);
    let x = gaussian_matrix(n, 3, &mut r);
    let mut y: Vec<f64> = (0..n).map(|_| if r.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    y[0] = 1.0;
    y[1] = -1.0;
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let d2: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            g[(i, j)] = (-0.5 * d2).exp();
        }
    }
    (g, y)
}

/// Euclidean projection onto `{0 <= a <= c, y.a = 0}` by bisection on the
/// multiplier of the equality constraint.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |mu: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - mu * yi).clamp(0.0, c)).collect() };
    let residual = |a: &[f64]| -> f64 { a.iter().zip(y).map(|(ai, yi)| ai * yi).sum() };
    let bound = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    // residual is nonincreasing in mu
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if residual(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Dense reference for the C-SVM dual: accelerated projected gradient with
/// gradient-based restarts until successive iterates agree to `tol`, then an
/// exact solve of the KKT system on the free variables.
pub fn reference_qp(gram: &Matrix, y: &[f64], c: f64, tol: f64) -> Vec<f64> {
    let n = y.len();
    let q = nalgebra::DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * gram[(i, j)]);
    let lip = q.clone().symmetric_eigenvalues().max();
    let step = 1.0 / lip.max(1e-12);
    let ones = nalgebra::DVector::from_element(n, 1.0);
    let grad = |a: &[f64]| -> Vec<f64> {
        let g = &q * nalgebra::DVector::from_column_slice(a) - &ones;
        g.as_slice().to_vec()
    };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t: f64 = 1.0;
    for _ in 0..1_000_000 {
        let g = grad(&z);
        let v: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - step * gi).collect();
        let next = project(&v, y, c);
        let diff = next.iter().zip(&a).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        // restart when the momentum direction opposes the gradient step
        let uphill: f64 = z.iter().zip(&next).zip(&a).map(|((zi, ni), ai)| (zi - ni) * (ni - ai)).sum();
        if uphill > 0.0 {
            t = 1.0;
            z = a.clone();
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = next.iter().zip(&a).map(|(p, q)| p + (t - 1.0) / t_next * (p - q)).collect();
        a = next;
        t = t_next;
        if diff < tol {
            break;
        }
    }
    polish(&q, y, c, a)
}

/// Solves `Q_FF a_F + mu y_F = 1 - Q_FB a_B`, `y_F . a_F = -y_B . a_B` on the
/// free set; keeps the input if the solution leaves the box or is worse.
fn polish(q: &nalgebra::DMatrix<f64>, y: &[f64], c: f64, a: Vec<f64>) -> Vec<f64> {
    let n = y.len();
    let edge = 1e-7 * c;
    let free: Vec<usize> = (0..n).filter(|&i| a[i] > edge && a[i] < c - edge).collect();
    if free.is_empty() {
        return a;
    }
    let bound: Vec<f64> = (0..n).map(|i| if free.contains(&i) { 0.0 } else if a[i] >= c - edge { c } else { 0.0 }).collect();
    let m = free.len();
    let mut kkt = nalgebra::DMatrix::zeros(m + 1, m + 1);
    let mut rhs = nalgebra::DVector::zeros(m + 1);
    for (r, &i) in free.iter().enumerate() {
        for (s, &j) in free.iter().enumerate() {
            kkt[(r, s)] = q[(i, j)];
        }
        kkt[(r, m)] = y[i];
        kkt[(m, r)] = y[i];
        rhs[r] = 1.0 - (0..n).map(|j| q[(i, j)] * bound[j]).sum::<f64>();
    }
    rhs[m] = -(0..n).map(|j| y[j] * bound[j]).sum::<f64>();
    let Some(sol) = kkt.lu().solve(&rhs) else {
        return a;
    };
    let mut out = bound;
    for (r, &i) in free.iter().enumerate() {
        out[i] = sol[r];
    }
    if out.iter().any(|&v| v < -1e-12 || v > c + 1e-12) {
        return a;
    }
    let obj = |v: &[f64]| {
        let x = nalgebra::DVector::from_column_slice(v);
        x.sum() - 0.5 * x.dot(&(q * &x))
    };
    if obj(&out) >= obj(&a) {
        out.iter_mut().for_each(|v| *v = v.clamp(0.0, c));
        out
    } else {
        a
    }
}
