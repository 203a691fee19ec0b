use crate::matrix::Matrix;

/// `exp(-gamma * |a_i - b_j|^2)` for every row pair.
pub fn rbf_kernel(a: &Matrix, b: &Matrix, gamma: f64) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        let x = a.row(i);
        for (j, y) in b.row_iter().enumerate() {
            let d2: f64 = x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum();
            out[(i, j)] = (-gamma * d2).exp();
        }
    }
    out
}

/// `(a_i . b_j / T + 1)^degree` for every row pair.
pub fn polynomial_kernel(a: &Matrix, b: &Matrix, degree: u32) -> Matrix {
    let t = a.cols().max(1) as f64;
    let mut out = Matrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        let x = a.row(i);
        for (j, y) in b.row_iter().enumerate() {
            let dot: f64 = x.iter().zip(y).map(|(u, v)| u * v).sum();
            out[(i, j)] = (dot / t + 1.0).powi(degree as i32);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        let a = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let k = rbf_kernel(&a, &a, 0.5);
        assert_eq!(k[(0, 0)], 1.0);
        assert!((k[(0, 1)] - (-1.0f64).exp()).abs() < 1e-15);
        let p = polynomial_kernel(&a, &a, 2);
        assert_eq!(p[(1, 1)], 4.0);
        assert_eq!(p[(0, 1)], 1.0);
    }
}
