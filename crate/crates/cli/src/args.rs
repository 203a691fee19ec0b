use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rntk_core::harness::{parse_methods, Method};
use rntk_core::kernel::DEFAULT_TILE_SIZE;
use rntk_core::Variant;

#[derive(Debug, Parser)]
#[command(name = "rntk", version, about = "Infinite-width RNN kernels: Gram files, oracle checks, benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads (default: available parallelism; 1 runs serially)
    #[arg(long, global = true, env = "RNTK_THREADS", value_parser = positive)]
    pub threads: Option<usize>,

    /// Rows per Gram tile
    #[arg(long, global = true, default_value_t = DEFAULT_TILE_SIZE, value_parser = positive)]
    pub tile_size: usize,

    /// More log output (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

impl Cli {
    pub fn log_level(&self) -> log::LevelFilter {
        match self.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute CK and NTK Gram matrices of a dataset
    Gram(GramArgs),
    /// Compare analytic kernels with finite-width Monte Carlo estimates
    Verify(VerifyArgs),
    /// Run the benchmark protocol over a directory of datasets
    Bench(BenchArgs),
    /// Time Gram computation over sweeps of N, T and L
    Timing(TimingArgs),
}

#[derive(Debug, Args)]
pub struct GramArgs {
    /// Dataset CSV (features, then integer label)
    #[arg(long)]
    pub data: PathBuf,
    /// rnn, bi-rnn, rnn-avg or bi-rnn-avg, optionally suffixed with -flip
    #[arg(long, default_value = "rnn", value_parser = parse_variant)]
    pub variant: Variant,
    /// Number of layers
    #[arg(long = "L", alias = "depth", default_value_t = 1, value_parser = positive)]
    pub depth: usize,
    #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
    pub sigma_w: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma_u: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_b: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_v: f64,
    /// Output directory; receives ck.gram and ntk.gram
    #[arg(long)]
    pub out: PathBuf,
    /// Also write ck.csv and ntk.csv
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Hidden width of the sampled networks
    #[arg(long, default_value_t = 4000, value_parser = positive)]
    pub width: usize,
    /// Independent draws per estimate
    #[arg(long, default_value_t = 50, value_parser = at_least_two)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Depths, comma-separated
    #[arg(long = "L", alias = "depths", value_delimiter = ',', default_values_t = [1usize, 2])]
    pub depths: Vec<usize>,
    /// Sequence lengths, comma-separated
    #[arg(long = "T", alias = "lengths", value_delimiter = ',', default_values_t = [2usize, 5])]
    pub lengths: Vec<usize>,
    /// Variants, comma-separated
    #[arg(long, value_delimiter = ',', value_parser = parse_variant,
          default_value = "rnn,bi-rnn,rnn-avg,bi-rnn-avg")]
    pub variants: Vec<Variant>,
    /// Largest accepted |z|
    #[arg(long, default_value_t = 3.0)]
    pub threshold: f64,
    /// JSON report path (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory of dataset CSVs, or a single CSV
    #[arg(long)]
    pub data: PathBuf,
    /// Methods, comma-separated (rnn, bi-rnn, rnn-avg, bi-rnn-avg, rnn-p, rbf, polynomial)
    #[arg(long, value_parser = parse_method_list)]
    pub methods: Option<MethodList>,
    /// Full JSON report
    #[arg(long, default_value = "bench-report.json")]
    pub out_json: PathBuf,
    /// Per-method aggregates
    #[arg(long, default_value = "bench-summary.csv")]
    pub out_csv: PathBuf,
    /// PMA as the fraction of datasets where a method is best
    #[arg(long)]
    pub pma_strict: bool,
}

#[derive(Clone, Debug)]
pub struct MethodList(pub Vec<Method>);

#[derive(Debug, Args)]
pub struct TimingArgs {
    /// Dataset sizes for the N sweep
    #[arg(long = "N", value_delimiter = ',', default_values_t = [100usize, 200, 400])]
    pub sizes: Vec<usize>,
    /// Lengths for the T sweep
    #[arg(long = "T", value_delimiter = ',', default_values_t = [10usize, 20, 40])]
    pub lengths: Vec<usize>,
    /// Depths for the L sweep
    #[arg(long = "L", value_delimiter = ',', default_values_t = [1usize, 2, 4])]
    pub depths: Vec<usize>,
    /// N held fixed in the T and L sweeps
    #[arg(long, default_value_t = 200)]
    pub base_n: usize,
    /// T held fixed in the N and L sweeps
    #[arg(long, default_value_t = 20)]
    pub base_t: usize,
    /// L held fixed in the N and T sweeps
    #[arg(long, default_value_t = 1)]
    pub base_l: usize,
    /// Timed repetitions per point
    #[arg(long, default_value_t = 3, value_parser = positive)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse::<Variant>().map_err(|e| e.to_string())
}

fn parse_method_list(s: &str) -> Result<MethodList, String> {
    parse_methods(s).map(MethodList).map_err(|e| e.to_string())
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn at_least_two(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v < 2 => Err("need at least 2 trials for a standard error".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}
