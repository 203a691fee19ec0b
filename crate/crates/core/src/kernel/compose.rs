use super::gram::GramPair;
use super::params::Variant;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Reverses the step order of a sequence.
pub fn flip(x: &[f64]) -> Vec<f64> {
    x.iter().rev().copied().collect()
}

/// Reverses every row of a dataset.
pub fn flip_rows(data: &Matrix) -> Matrix {
    let mut out = data.clone();
    for i in 0..out.rows() {
        out.row_mut(i).reverse();
    }
    out
}

/// Bidirectional kernels as the sum of the forward-order and reversed-order
/// kernels of the same one-directional architecture. Cross terms between the
/// two networks vanish because their output heads are independent.
pub fn compose_bidirectional(fwd: &GramPair, bwd: &GramPair) -> Result<GramPair> {
    if fwd.ck.shape() != bwd.ck.shape() || fwd.ntk.shape() != bwd.ntk.shape() {
        return Err(Error::Composition(format!(
            "shapes differ: {:?} vs {:?}",
            fwd.ck.shape(),
            bwd.ck.shape()
        )));
    }
    if fwd.params != bwd.params {
        return Err(Error::Composition("hyperparameters differ".into()));
    }
    if fwd.variant.arch != bwd.variant.arch {
        return Err(Error::Composition(format!(
            "architectures differ: {} vs {}",
            fwd.variant, bwd.variant
        )));
    }
    if fwd.variant.arch.is_bidirectional() {
        return Err(Error::Composition(format!(
            "{} is already bidirectional",
            fwd.variant
        )));
    }
    let arch = if fwd.variant.arch.is_pooled() {
        super::params::Architecture::BiRnnAvg
    } else {
        super::params::Architecture::BiRnn
    };
    Ok(GramPair {
        ck: fwd.ck.add(&bwd.ck)?,
        ntk: fwd.ntk.add(&bwd.ntk)?,
        params: fwd.params,
        variant: Variant::new(arch),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::gram::gram;
    use crate::kernel::params::HyperParams;
    use proptest::prelude::*;

    #[test]
    fn flips_sequence() {
        assert_eq!(flip(&[1.0, 2.0, 3.0, 4.0]), vec![4.0, 3.0, 2.0, 1.0]);
        assert_eq!(flip(&[1.0, 2.0, 1.0]), vec![1.0, 2.0, 1.0]);
        assert!(flip(&[]).is_empty());
    }

    proptest! {
        #[test]
        fn flip_is_an_involution(x in proptest::collection::vec(-1e6f64..1e6, 0..40)) {
            prop_assert_eq!(flip(&flip(&x)), x);
        }
    }

    #[test]
    fn palindromes_double_the_kernel() {
        let data = Matrix::from_rows(&[[1.0, -0.5, 1.0], [0.2, 0.9, 0.2], [-1.0, 0.0, -1.0]]).unwrap();
        let p = HyperParams::default();
        let plain = gram(&data, &p, Variant::RNN).unwrap();
        let bi = gram(&data, &p, Variant::BI_RNN).unwrap();
        assert_eq!(bi.ntk, plain.ntk.scaled(2.0));
        assert_eq!(bi.ck, plain.ck.scaled(2.0));
    }

    #[test]
    fn rejects_mismatched_operands() {
        let a = Matrix::from_rows(&[[0.1, 0.2], [0.3, 0.4]]).unwrap();
        let p = HyperParams::default();
        let rnn = gram(&a, &p, Variant::RNN).unwrap();
        let avg = gram(&a, &p, Variant::RNN_AVG).unwrap();
        assert!(matches!(compose_bidirectional(&rnn, &avg), Err(Error::Composition(_))));

        let other = gram(&a, &p.with_sigma_v(2.0), Variant::RNN).unwrap();
        assert!(matches!(compose_bidirectional(&rnn, &other), Err(Error::Composition(_))));

        let small = gram(&a.select_rows(&[0]), &p, Variant::RNN).unwrap();
        assert!(matches!(compose_bidirectional(&rnn, &small), Err(Error::Composition(_))));

        let bi = gram(&a, &p, Variant::BI_RNN).unwrap();
        assert!(compose_bidirectional(&bi, &bi).is_err());
    }
}
