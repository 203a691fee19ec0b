//! C-SVM classification on precomputed kernels.

mod multiclass;
mod smo;

pub use multiclass::{predict, train_multiclass, vote, MultiClassModel};
pub use smo::{
    dual_objective, kkt_violation, smo_train, smo_train_with, DualModel, SmoConfig, DEFAULT_MAX_ITER,
    DEFAULT_TOL, NON_PSD_TOL,
};
