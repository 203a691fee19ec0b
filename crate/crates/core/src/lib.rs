//! Conjugate and neural tangent kernels of infinite-width recurrent networks
//! (plain, bidirectional, and average-pooled), a finite-width Monte Carlo
//! oracle that checks them, a precomputed-kernel SVM, and the benchmark
//! protocol that compares them on tabular datasets.

pub mod error;
pub mod harness;
pub mod kernel;
pub mod matrix;
pub mod oracle;
pub mod svm;

pub use error::{Error, Result};
pub use kernel::{
    compose_bidirectional, flip, gram, gram_cross, kernel_pair, vphi, vphi_prime, Architecture,
    Cov2, CrossGram, GramOptions, GramPair, HyperParams, InputOrder, KernelKind, PairOutputs,
    Variant,
};
pub use matrix::Matrix;
