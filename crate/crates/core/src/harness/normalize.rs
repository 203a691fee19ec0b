use crate::matrix::Matrix;

/// Per-feature z-scores with train-only population statistics; zero-variance
/// features become 0 in both splits.
pub fn normalize(train: &Matrix, test: &Matrix) -> (Matrix, Matrix) {
    assert_eq!(train.cols(), test.cols(), "train and test lengths differ");
    let n = train.rows().max(1) as f64;
    let cols = train.cols();
    let mut mean = vec![0.0; cols];
    for row in train.row_iter() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; cols];
    for row in train.row_iter() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .zip(&mean)
        .map(|(s, m)| {
            let sd = (s / n).sqrt();
            if sd > 1e-12 * m.abs().max(1.0) {
                1.0 / sd
            } else {
                0.0
            }
        })
        .collect();
    let apply = |x: &Matrix| {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for ((v, m), s) in out.row_mut(i).iter_mut().zip(&mean).zip(&scale) {
                *v = (*v - m) * s;
            }
        }
        out
    };
    (apply(train), apply(test))
}
