mod common;

use rand::Rng;
use rntk_core::svm::{dual_objective, kkt_violation, smo_train, train_multiclass, SmoConfig};
use rntk_core::Matrix;

#[test]
fn smo_objective_matches_reference_qp() {
    let mut r = common::rng(70);
    for case in 0..10 {
        let (g, y) = common::rbf_problem(30, 100 + case);
        let c = [0.1, 1.0, 10.0][r.random_range(0..3)];
        let model = smo_train(&g, &y, c, 1e-6).unwrap();
        let reference = common::reference_qp(&g, &y, c, 1e-10);
        let want = dual_objective(&g, &y, &reference);
        assert!(
            (model.objective - want).abs() <= 1e-6 * want.abs(),
            "case {case}: smo {} reference {want}",
            model.objective
        );
        assert!(kkt_violation(&g, &y, &model.dual_vector(30), c) <= 1e-6);
        assert!(kkt_violation(&g, &y, &reference, c) <= 1e-5);
    }
}

fn linear_gram(x: &Matrix) -> Matrix {
    let mut g = Matrix::zeros(x.rows(), x.rows());
    for i in 0..x.rows() {
        for j in 0..x.rows() {
            g[(i, j)] = x.row(i).iter().zip(x.row(j)).map(|(a, b)| a * b).sum();
        }
    }
    g
}

/// 20 points on either side of a margin around `w . x = 0.5`.
fn separable(seed: u64) -> (Matrix, Vec<f64>) {
    let mut r = common::rng(seed);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    while rows.len() < 20 {
        let p = common::gaussian_vec(2, &mut r);
        let s = p[0] + 2.0 * p[1] - 0.5;
        if s.abs() > 0.3 {
            y.push(s.signum());
            // constant feature lets a linear kernel carry an offset
            rows.push(vec![p[0], p[1], 1.0]);
        }
    }
    (Matrix::from_rows(&rows).unwrap(), y)
}

#[test]
fn separable_data_is_fitted_exactly() {
    for seed in 0..5 {
        let (x, y) = separable(seed);
        let g = linear_gram(&x);
        let m = smo_train(&g, &y, 1e6, 1e-3).unwrap();
        for i in 0..20 {
            assert_eq!(m.decision(g.row(i)).signum(), y[i], "seed {seed} point {i}");
        }
        // a duplicate training point is classified like its original
        let labels: Vec<i64> = y.iter().map(|&v| v as i64).collect();
        let mc = train_multiclass(&g, &labels, &SmoConfig::new(1e6)).unwrap();
        assert_eq!(mc.predict(&g.select_rows(&[3, 3])).unwrap(), vec![labels[3]; 2]);
    }
}

#[test]
fn gram_and_c_scaling_preserve_training_signs() {
    let mut r = common::rng(71);
    for case in 0..8 {
        let (g, y) = common::rbf_problem(25, 200 + case);
        let c = r.random_range(0.5..5.0);
        let s = r.random_range(0.2..5.0);
        let a = smo_train(&g, &y, c, 1e-8).unwrap();
        let b = smo_train(&g.scaled(s), &y, c / s, 1e-8).unwrap();
        let scaled = g.scaled(s);
        for i in 0..25 {
            let (da, db) = (a.decision(g.row(i)), b.decision(scaled.row(i)));
            if da.abs() > 1e-6 {
                assert_eq!(da.signum(), db.signum(), "case {case} point {i}: {da} vs {db}");
            }
        }
    }
}

#[test]
fn dual_constraints_hold() {
    let (g, y) = common::rbf_problem(30, 5);
    let m = smo_train(&g, &y, 2.0, 1e-3).unwrap();
    assert!(m.alphas.iter().all(|a| a.abs() <= 2.0 + 1e-12));
    assert!(m.alphas.iter().sum::<f64>().abs() <= 1e-8);
    assert!(m.kkt_gap <= 1e-3);
}

#[test]
fn indefinite_gram_is_still_solved() {
    let (mut g, y) = common::rbf_problem(20, 9);
    for i in 0..20 {
        g[(i, i)] -= 0.05;
    }
    assert!(g.min_eigenvalue() < 0.0);
    let m = smo_train(&g, &y, 1.0, 1e-3).unwrap();
    assert!(m.alphas.iter().sum::<f64>().abs() <= 1e-8);
}
