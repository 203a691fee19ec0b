//! Analytic CK and NTK of infinite-width recurrent networks.

mod compose;
mod gram;
pub mod io;
mod params;
mod recursion;
mod vphi;

pub use compose::{compose_bidirectional, flip, flip_rows};
pub use gram::{
    base_cross, base_grams, gram, gram_cross, gram_cross_with, gram_with, pair_buffers_per_tile,
    recursion_passes, BaseGrams, CrossGram, GramOptions, GramPair, KernelKind, RecursionState,
    DEFAULT_TILE_SIZE,
};
pub use params::{Activation, Architecture, HyperParams, InputOrder, Variant};
pub use recursion::{kernel_pair, pair_trace, PairOutputs, StepTrace};
pub use vphi::{vphi, vphi_prime, Cov2};
