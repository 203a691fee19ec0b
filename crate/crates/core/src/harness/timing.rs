use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{gram_with, GramOptions, HyperParams, Variant};
use crate::matrix::Matrix;

/// Per-doubling growth expected when sweeping N (quadratic cost).
pub const N_RATIO_BOUNDS: (f64, f64) = (2.5, 6.5);
/// Per-doubling growth expected when sweeping T or L (linear cost).
pub const LINEAR_RATIO_BOUNDS: (f64, f64) = (1.5, 2.8);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub sizes: Vec<usize>,
    pub lengths: Vec<usize>,
    pub depths: Vec<usize>,
    pub base_n: usize,
    pub base_t: usize,
    pub base_l: usize,
    pub reps: usize,
    pub seed: u64,
    pub tile_size: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            sizes: vec![100, 200, 400],
            lengths: vec![10, 20, 40],
            depths: vec![1, 2, 4],
            base_n: 200,
            base_t: 20,
            base_l: 1,
            reps: 3,
            seed: 0,
            tile_size: GramOptions::default().tile_size,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sweep {
    N,
    T,
    L,
}

impl Sweep {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Sweep::N => N_RATIO_BOUNDS,
            Sweep::T | Sweep::L => LINEAR_RATIO_BOUNDS,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sweep::N => "N",
            Sweep::T => "T",
            Sweep::L => "L",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingPoint {
    pub sweep: Sweep,
    pub n: usize,
    pub t: usize,
    pub l: usize,
    /// Mean wall-clock seconds per Gram.
    pub seconds: f64,
    /// Growth per doubling relative to the previous point of the sweep.
    pub ratio: Option<f64>,
}

impl TimingPoint {
    fn size(&self) -> usize {
        match self.sweep {
            Sweep::N => self.n,
            Sweep::T => self.t,
            Sweep::L => self.l,
        }
    }

    /// `None` for the first point of a sweep.
    pub fn within_bounds(&self) -> Option<bool> {
        let (lo, hi) = self.sweep.bounds();
        self.ratio.map(|r| (lo..=hi).contains(&r))
    }
}

/// Standard normal `n x t` data.
pub fn synthetic_data(n: usize, t: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * t).map(|_| StandardNormal.sample(&mut rng)).collect();
    Matrix::from_vec(n, t, data).expect("length matches shape")
}

fn time_gram(n: usize, t: usize, l: usize, cfg: &TimingConfig) -> Result<f64> {
    let data = synthetic_data(n, t, cfg.seed);
    let params = HyperParams {
        depth: l,
        ..HyperParams::default()
    };
    let opts = GramOptions {
        tile_size: cfg.tile_size,
    };
    // warm-up run is not timed
    gram_with(&data, &params, Variant::RNN, &opts)?;
    let started = Instant::now();
    for _ in 0..cfg.reps {
        gram_with(&data, &params, Variant::RNN, &opts)?;
    }
    Ok(started.elapsed().as_secs_f64() / cfg.reps as f64)
}

/// Times CK+NTK Gram computation along the N, T, and L sweeps.
pub fn timing_sweep(cfg: &TimingConfig) -> Result<Vec<TimingPoint>> {
    let all = cfg.sizes.iter().chain(&cfg.lengths).chain(&cfg.depths);
    if cfg.reps == 0 || all.chain([&cfg.base_n, &cfg.base_t, &cfg.base_l]).any(|&v| v == 0) {
        return Err(Error::InvalidConfig("sweep values and repetitions must be positive".into()));
    }
    let mut points: Vec<TimingPoint> = Vec::new();
    let plan = cfg
        .sizes
        .iter()
        .map(|&n| (Sweep::N, n, cfg.base_t, cfg.base_l))
        .chain(cfg.lengths.iter().map(|&t| (Sweep::T, cfg.base_n, t, cfg.base_l)))
        .chain(cfg.depths.iter().map(|&l| (Sweep::L, cfg.base_n, cfg.base_t, l)));
    for (sweep, n, t, l) in plan {
        let mut p = TimingPoint {
            sweep,
            n,
            t,
            l,
            seconds: time_gram(n, t, l, cfg)?,
            ratio: None,
        };
        if let Some(prev) = points.last().filter(|q| q.sweep == sweep) {
            let doublings = (p.size() as f64 / prev.size() as f64).log2();
            if doublings > 0.0 {
                p.ratio = Some((p.seconds / prev.seconds).powf(1.0 / doublings));
            }
        }
        points.push(p);
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_sweep_shape() {
        let cfg = TimingConfig {
            sizes: vec![4, 8],
            lengths: vec![2],
            depths: vec![1, 2],
            base_n: 4,
            base_t: 2,
            base_l: 1,
            reps: 1,
            ..TimingConfig::default()
        };
        let pts = timing_sweep(&cfg).unwrap();
        assert_eq!(pts.len(), 5);
        assert!(pts[0].ratio.is_none() && pts[1].ratio.is_some());
        assert!(pts[2].ratio.is_none());
        assert!(timing_sweep(&TimingConfig { reps: 0, ..cfg }).is_err());
    }
}
