//! Finite-width recurrent networks sampled at initialization, used as a
//! Monte Carlo reference for the analytic kernels.

mod estimate;
mod forward;
mod verify;
mod weights;

pub use estimate::{
    cross_head_terms, empirical_ck, empirical_kernels, empirical_ntk, CrossHeadEstimate,
    KernelEstimate, OracleConfig, VariantEstimate,
};
pub use forward::{
    backprop, forward, gradient, gradient_of, run_rnn, ForwardTrace, HeadMask, NetworkGradient,
    NetworkOutput, TapeGradient,
};
pub use weights::{sample_rnn, NetworkWeights, RnnWeights};
pub use verify::{analytic_pair, unit_inputs, verify_grid, VerifyGrid, VerifyRecord, Z_THRESHOLD};
