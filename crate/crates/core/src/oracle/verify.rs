//! Analytic-versus-Monte-Carlo comparison over a grid of depths, lengths,
//! and variants.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::estimate::{empirical_kernels, KernelEstimate, OracleConfig};
use super::weights::derive_seed;
use crate::error::{Error, Result};
use crate::kernel::{flip, kernel_pair, HyperParams, InputOrder, KernelKind, Variant};

/// Default acceptance threshold on `|z|`.
pub const Z_THRESHOLD: f64 = 3.0;

/// Analytic `(ck, ntk)` of one pair under `variant`.
pub fn analytic_pair(x: &[f64], y: &[f64], params: &HyperParams, variant: Variant) -> Result<(f64, f64)> {
    let pooled = variant.arch.is_pooled();
    let select = |a: &[f64], b: &[f64]| -> Result<(f64, f64)> {
        let out = kernel_pair(a, b, params)?;
        Ok(if pooled {
            (out.ck_avg, out.ntk_avg)
        } else {
            (out.ck_last, out.ntk_last)
        })
    };
    let (fx, fy) = (flip(x), flip(y));
    if variant.arch.is_bidirectional() {
        let (c1, n1) = select(x, y)?;
        let (c2, n2) = select(&fx, &fy)?;
        Ok((c1 + c2, n1 + n2))
    } else if variant.order == InputOrder::Flipped {
        select(&fx, &fy)
    } else {
        select(x, y)
    }
}

/// Two independent Gaussian directions of unit norm.
pub fn unit_inputs(length: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let v: Vec<f64> = (0..length).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.into_iter().map(|a| a / norm).collect::<Vec<f64>>()
    };
    let x = draw();
    (x, draw())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyRecord {
    pub depth: usize,
    pub length: usize,
    pub variant: String,
    pub kernel: KernelKind,
    pub analytic: f64,
    pub estimate: KernelEstimate,
    pub z: f64,
}

impl VerifyRecord {
    pub fn passes(&self, threshold: f64) -> bool {
        self.z.abs() <= threshold
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyGrid {
    pub depths: Vec<usize>,
    pub lengths: Vec<usize>,
    pub variants: Vec<Variant>,
    pub sigma_w: f64,
    pub sigma_u: f64,
    pub sigma_b: f64,
}

impl Default for VerifyGrid {
    fn default() -> Self {
        Self {
            depths: vec![1, 2],
            lengths: vec![2, 5],
            variants: Variant::ALL.to_vec(),
            sigma_w: 2f64.sqrt(),
            sigma_u: 0.5,
            sigma_b: 0.1,
        }
    }
}

/// One record per `(depth, length, variant, kernel)`. Inputs for each
/// `(depth, length)` are drawn from `cfg.seed`; weights from an
/// independent stream of the same seed.
pub fn verify_grid(grid: &VerifyGrid, cfg: &OracleConfig) -> Result<Vec<VerifyRecord>> {
    if grid.variants.is_empty() {
        return Err(Error::InvalidConfig("no variants to verify".into()));
    }
    let mut out = Vec::new();
    for &depth in &grid.depths {
        for &length in &grid.lengths {
            let params = HyperParams::new(grid.sigma_w, grid.sigma_u, grid.sigma_b, 1.0, depth)?;
            let (x, y) = unit_inputs(length, derive_seed(cfg.seed, 0x1000 + length as u64));
            let weights = OracleConfig {
                seed: derive_seed(cfg.seed, 0x2000 + 16 * length as u64 + depth as u64),
                ..*cfg
            };
            for est in empirical_kernels(&x, &y, &params, &grid.variants, &weights)? {
                let (ck, ntk) = analytic_pair(&x, &y, &params, est.variant)?;
                for (kernel, analytic, estimate) in
                    [(KernelKind::Ck, ck, est.ck), (KernelKind::Ntk, ntk, est.ntk)]
                {
                    out.push(VerifyRecord {
                        depth,
                        length,
                        variant: est.variant.to_string(),
                        kernel,
                        analytic,
                        estimate,
                        z: estimate.z_score(analytic),
                    });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_are_unit_and_seeded() {
        let (x, y) = unit_inputs(5, 3);
        for v in [&x, &y] {
            assert!((v.iter().map(|a| a * a).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_ne!(x, y);
        assert_eq!(unit_inputs(5, 3), (x, y));
    }

    #[test]
    fn bidirectional_analytic_is_flip_symmetric() {
        let p = HyperParams::default();
        let (x, y) = unit_inputs(4, 9);
        let a = analytic_pair(&x, &y, &p, Variant::BI_RNN_AVG).unwrap();
        let b = analytic_pair(&flip(&x), &flip(&y), &p, Variant::BI_RNN_AVG).unwrap();
        assert_eq!(a, b);
        let f = analytic_pair(&x, &y, &p, Variant::RNN.flipped()).unwrap();
        assert_eq!(f, analytic_pair(&flip(&x), &flip(&y), &p, Variant::RNN).unwrap());
    }

    #[test]
    fn small_grid_runs() {
        let grid = VerifyGrid {
            depths: vec![1],
            lengths: vec![2],
            ..VerifyGrid::default()
        };
        let cfg = OracleConfig {
            width: 64,
            trials: 3,
            seed: 1,
        };
        let recs = verify_grid(&grid, &cfg).unwrap();
        assert_eq!(recs.len(), 8);
        assert!(recs.iter().all(|r| r.z.is_finite()));
    }
}
