mod common;

use proptest::prelude::*;
use rntk_core::kernel::flip_rows;
use rntk_core::{flip, gram, kernel_pair, HyperParams, Matrix, Variant};

fn params_strategy() -> impl Strategy<Value = HyperParams> {
    (0.5f64..2.0, 0.1f64..1.5, 0.0f64..0.5, 0.5f64..1.5, 1usize..=3)
        .prop_map(|(w, u, b, v, l)| HyperParams::new(w, u, b, v, l).unwrap())
}

fn pair_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..8).prop_flat_map(|t| {
        (
            proptest::collection::vec(-2.0f64..2.0, t),
            proptest::collection::vec(-2.0f64..2.0, t),
        )
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pooled_kernel_is_sum_of_prefix_kernels((x, y) in pair_strategy(), p in params_strategy()) {
        let full = kernel_pair(&x, &y, &p).unwrap();
        let (mut ck, mut ntk) = (0.0, 0.0);
        for t in 1..=x.len() {
            let prefix = kernel_pair(&x[..t], &y[..t], &p).unwrap();
            ck += prefix.ck_last;
            ntk += prefix.ntk_last;
        }
        prop_assert!(rel(full.ck_avg, ck) <= 1e-10);
        prop_assert!(rel(full.ntk_avg, ntk) <= 1e-10);
    }

    #[test]
    fn output_scale_enters_quadratically((x, y) in pair_strategy(), p in params_strategy(), s in 0.1f64..3.0) {
        let base = kernel_pair(&x, &y, &p.with_sigma_v(1.0)).unwrap();
        let scaled = kernel_pair(&x, &y, &p.with_sigma_v(s)).unwrap();
        let s2 = s * s;
        for (a, b) in [
            (base.ck_last, scaled.ck_last),
            (base.ntk_last, scaled.ntk_last),
            (base.ck_avg, scaled.ck_avg),
            (base.ntk_avg, scaled.ntk_avg),
        ] {
            prop_assert!((a * s2 - b).abs() <= 1e-12 * b.abs().max(1e-12));
        }
    }

    #[test]
    fn ntk_dominates_ck_on_the_diagonal(x in proptest::collection::vec(-2.0f64..2.0, 1..8), p in params_strategy()) {
        let k = kernel_pair(&x, &x, &p).unwrap();
        prop_assert!(k.ck_last >= 0.0);
        prop_assert!(k.ntk_last >= k.ck_last);
        prop_assert!(k.ntk_avg >= k.ck_avg);
    }

    #[test]
    fn kernels_are_symmetric((x, y) in pair_strategy(), p in params_strategy()) {
        prop_assert_eq!(kernel_pair(&x, &y, &p).unwrap(), kernel_pair(&y, &x, &p).unwrap());
    }

    #[test]
    fn cauchy_schwarz((x, y) in pair_strategy(), p in params_strategy()) {
        let xy = kernel_pair(&x, &y, &p).unwrap();
        let xx = kernel_pair(&x, &x, &p).unwrap();
        let yy = kernel_pair(&y, &y, &p).unwrap();
        let slack = 1e-12;
        prop_assert!(xy.ck_last.powi(2) <= xx.ck_last * yy.ck_last * (1.0 + slack) + slack);
        prop_assert!(xy.ntk_avg.powi(2) <= xx.ntk_avg * yy.ntk_avg * (1.0 + slack) + slack);
    }

    #[test]
    fn bidirectional_is_flip_invariant((x, y) in pair_strategy(), p in params_strategy()) {
        let data = Matrix::from_rows(&[x.clone(), y.clone()]).unwrap();
        let flipped = Matrix::from_rows(&[flip(&x), flip(&y)]).unwrap();
        for v in [Variant::BI_RNN, Variant::BI_RNN_AVG] {
            let a = gram(&data, &p, v).unwrap();
            let b = gram(&flipped, &p, v).unwrap();
            prop_assert_eq!(a.ck, b.ck);
            prop_assert_eq!(a.ntk, b.ntk);
        }
    }
}

#[test]
fn grams_are_symmetric_and_psd() {
    let mut r = common::rng(40);
    for _ in 0..5 {
        let data = common::gaussian_matrix(25, 6, &mut r);
        let p = common::random_params(&mut r, 2);
        for v in Variant::ALL {
            let g = gram(&data, &p, v).unwrap();
            for m in [&g.ck, &g.ntk] {
                assert!(m.is_symmetric());
                assert!(m.min_eigenvalue() >= -1e-8 * m.trace() / 25.0);
            }
        }
    }
}

#[test]
fn flipped_order_is_the_plain_kernel_of_flipped_rows() {
    let mut r = common::rng(41);
    let data = common::gaussian_matrix(9, 5, &mut r);
    let p = HyperParams::default();
    let a = gram(&data, &p, Variant::RNN_AVG.flipped()).unwrap();
    let b = gram(&flip_rows(&data), &p, Variant::RNN_AVG).unwrap();
    assert_eq!(a.ck, b.ck);
    assert_eq!(a.ntk, b.ntk);
}
