//! Benchmark protocol: dataset ingestion, split handling, grid search over
//! kernels and SVM regularization, cross-testing, and summary metrics.

mod baseline;
mod dataset;
mod grid;
mod metrics;
mod normalize;
mod protocol;
mod report;
mod splits;
mod timing;

pub use baseline::{polynomial_kernel, rbf_kernel};
pub use dataset::{load_dataset, read_dataset, Dataset, MIN_POINTS};
pub use grid::{
    configurations, parse_methods, sigma_v_for, Config, HyperGrid, KernelChoice, Method,
};
pub use metrics::{average_ranks, compute_metrics, MethodSummary, PmaMode, TIE_TOL};
pub use normalize::normalize;
pub use protocol::{run_protocol, DatasetResult, MethodResult, ProtocolOptions};
pub use report::BenchReport;
pub use splits::{sidecar_path, splits_for, Splits, N_FOLDS};
pub use timing::{
    synthetic_data, timing_sweep, Sweep, TimingConfig, TimingPoint, LINEAR_RATIO_BOUNDS,
    N_RATIO_BOUNDS,
};
