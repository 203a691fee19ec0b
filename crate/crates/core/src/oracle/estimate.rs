//! Monte Carlo estimates of the CK and NTK from independent finite-width
//! draws.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::forward::{backprop, run_rnn, ForwardTrace, HeadMask, TapeGradient};
use super::weights::{derive_seed, sample_rnn, RnnWeights};
use crate::error::{Error, Result};
use crate::kernel::{flip, HyperParams, Variant};

/// Sample mean of a Monte Carlo quantity with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub width: usize,
}

impl KernelEstimate {
    pub fn from_samples(samples: &[f64], width: usize) -> Result<Self> {
        let r = samples.len();
        if r < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 trials for a standard error, got {r}"
            )));
        }
        let mean = samples.iter().sum::<f64>() / r as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
        Ok(Self {
            mean,
            stderr: (var / r as f64).sqrt(),
            trials: r,
            width,
        })
    }

    /// `(mean - reference) / stderr`; zero when both the error and the
    /// deviation vanish.
    pub fn z_score(&self, reference: f64) -> f64 {
        let dev = self.mean - reference;
        if dev == 0.0 {
            0.0
        } else if self.stderr == 0.0 {
            f64::INFINITY * dev.signum()
        } else {
            dev / self.stderr
        }
    }

    pub fn relative_deviation(&self, reference: f64) -> f64 {
        (self.mean - reference).abs() / reference.abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub width: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            width: 4000,
            trials: 50,
            seed: 0,
        }
    }
}

impl OracleConfig {
    fn validate(&self) -> Result<()> {
        if self.trials < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 trials, got {}",
                self.trials
            )));
        }
        if self.width == 0 {
            return Err(Error::InvalidConfig("width must be at least 1".into()));
        }
        Ok(())
    }
}

/// CK and NTK estimates of one variant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantEstimate {
    pub variant: Variant,
    pub ck: KernelEstimate,
    pub ntk: KernelEstimate,
}

fn check(x: &[f64], y: &[f64], params: &HyperParams) -> Result<()> {
    params.validate()?;
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Shape(format!(
            "inputs must share a nonzero length, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

fn trial_forward(params: &HyperParams, steps: usize, cfg: &OracleConfig, trial: usize) -> Result<RnnWeights> {
    let seed = derive_seed(cfg.seed, trial as u64);
    sample_rnn(cfg.width, params.depth, 1, steps, derive_seed(seed, 0xF0))
}

fn trial_backward(params: &HyperParams, steps: usize, cfg: &OracleConfig, trial: usize) -> Result<RnnWeights> {
    let seed = derive_seed(cfg.seed, trial as u64);
    sample_rnn(cfg.width, params.depth, 1, steps, derive_seed(seed, 0xB0))
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Direction {
    Forward,
    Backward,
}

/// Traces and tapes of one trial, built on demand and shared by variants.
struct TrialTapes<'a> {
    params: &'a HyperParams,
    x: &'a [f64],
    y: &'a [f64],
    forward: RnnWeights,
    backward: Option<RnnWeights>,
    traces: HashMap<(Direction, bool, bool), ForwardTrace>,
    tapes: HashMap<(Direction, bool, bool, bool), TapeGradient>,
}

impl TrialTapes<'_> {
    fn weights(&self, dir: Direction) -> &RnnWeights {
        match dir {
            Direction::Forward => &self.forward,
            Direction::Backward => self.backward.as_ref().expect("backward network sampled"),
        }
    }

    /// Trace of `dir` on `x` (`second = false`) or `y`, optionally reversed.
    fn trace(&mut self, dir: Direction, flipped: bool, second: bool) -> Result<&ForwardTrace> {
        let key = (dir, flipped, second);
        if !self.traces.contains_key(&key) {
            let input = if second { self.y } else { self.x };
            let input = if flipped { flip(input) } else { input.to_vec() };
            let trace = run_rnn(self.weights(dir), self.params, &input)?;
            self.traces.insert(key, trace);
        }
        Ok(&self.traces[&key])
    }

    fn tape(&mut self, dir: Direction, flipped: bool, second: bool, pooled: bool) -> Result<&TapeGradient> {
        let key = (dir, flipped, second, pooled);
        if !self.tapes.contains_key(&key) {
            let trace = self.trace(dir, flipped, second)?.clone();
            let mask = if pooled {
                HeadMask::all(trace.steps())
            } else {
                HeadMask::last(trace.steps())
            };
            let tape = backprop(self.weights(dir), self.params, &trace, &mask);
            self.tapes.insert(key, tape);
        }
        Ok(&self.tapes[&key])
    }

    /// `(f(x) f(y), <grad f(x), grad f(y)>)` for one variant.
    fn sample(&mut self, variant: Variant) -> Result<(f64, f64)> {
        let pooled = variant.arch.is_pooled();
        let mut parts = vec![(Direction::Forward, variant.is_flipped())];
        if variant.arch.is_bidirectional() {
            parts.push((Direction::Backward, true));
        }
        let mut fx = 0.0;
        let mut fy = 0.0;
        let mut ntk = 0.0;
        for (dir, flipped) in parts {
            let steps = self.x.len();
            let mask = if pooled {
                HeadMask::all(steps)
            } else {
                HeadMask::last(steps)
            };
            fx += mask.apply(self.trace(dir, flipped, false)?);
            fy += mask.apply(self.trace(dir, flipped, true)?);
            let a = self.tape(dir, flipped, false, pooled)?.clone();
            let params = self.params;
            let b = self.tape(dir, flipped, true, pooled)?;
            ntk += a.inner(b, params);
        }
        Ok((fx * fy, ntk))
    }
}

/// CK and NTK estimates for several variants from shared weight draws.
///
/// Each trial draws one forward network (and one reversed network if any
/// variant is bidirectional); every variant's estimate is individually an
/// average over independent draws.
pub fn empirical_kernels(
    x: &[f64],
    y: &[f64],
    params: &HyperParams,
    variants: &[Variant],
    cfg: &OracleConfig,
) -> Result<Vec<VariantEstimate>> {
    check(x, y, params)?;
    cfg.validate()?;
    let steps = x.len();
    let need_backward = variants.iter().any(|v| v.arch.is_bidirectional());
    let mut ck_samples = vec![Vec::with_capacity(cfg.trials); variants.len()];
    let mut ntk_samples = vec![Vec::with_capacity(cfg.trials); variants.len()];

    for trial in 0..cfg.trials {
        let mut tapes = TrialTapes {
            params,
            x,
            y,
            forward: trial_forward(params, steps, cfg, trial)?,
            backward: if need_backward {
                Some(trial_backward(params, steps, cfg, trial)?)
            } else {
                None
            },
            traces: HashMap::new(),
            tapes: HashMap::new(),
        };
        for (k, &v) in variants.iter().enumerate() {
            let (ck, ntk) = tapes.sample(v)?;
            ck_samples[k].push(ck);
            ntk_samples[k].push(ntk);
        }
    }

    variants
        .iter()
        .enumerate()
        .map(|(k, &variant)| {
            Ok(VariantEstimate {
                variant,
                ck: KernelEstimate::from_samples(&ck_samples[k], cfg.width)?,
                ntk: KernelEstimate::from_samples(&ntk_samples[k], cfg.width)?,
            })
        })
        .collect()
}

/// Mean of `f(x) f(y)` over independent draws.
pub fn empirical_ck(x: &[f64], y: &[f64], params: &HyperParams, variant: Variant, cfg: &OracleConfig) -> Result<KernelEstimate> {
    Ok(empirical_kernels(x, y, params, &[variant], cfg)?[0].ck)
}

/// Mean of `<grad f(x), grad f(y)>` over independent draws.
pub fn empirical_ntk(x: &[f64], y: &[f64], params: &HyperParams, variant: Variant, cfg: &OracleConfig) -> Result<KernelEstimate> {
    Ok(empirical_kernels(x, y, params, &[variant], cfg)?[0].ntk)
}

/// Products between two different output heads of the same network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossHeadEstimate {
    /// `f(t1)(x) f(t2)(y)`.
    pub output_product: KernelEstimate,
    /// `<grad f(t1)(x), grad f(t2)(y)>`.
    pub gradient_inner: KernelEstimate,
}

/// Cross-head terms for heads `t1 != t2` (1-based). Both vanish in
/// expectation because the heads have independent output weights.
pub fn cross_head_terms(
    x: &[f64],
    y: &[f64],
    params: &HyperParams,
    heads: (usize, usize),
    cfg: &OracleConfig,
) -> Result<CrossHeadEstimate> {
    check(x, y, params)?;
    cfg.validate()?;
    let steps = x.len();
    let (t1, t2) = heads;
    if t1 == t2 || !(1..=steps).contains(&t1) || !(1..=steps).contains(&t2) {
        return Err(Error::InvalidConfig(format!(
            "heads must be distinct steps in 1..={steps}, got {heads:?}"
        )));
    }
    let mut products = Vec::with_capacity(cfg.trials);
    let mut inners = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let w = trial_forward(params, steps, cfg, trial)?;
        let tx = run_rnn(&w, params, x)?;
        let ty = run_rnn(&w, params, y)?;
        products.push(tx.outputs()[t1 - 1] * ty.outputs()[t2 - 1]);
        let gx = backprop(&w, params, &tx, &HeadMask::single(steps, t1));
        let gy = backprop(&w, params, &ty, &HeadMask::single(steps, t2));
        inners.push(gx.inner(&gy, params));
    }
    Ok(CrossHeadEstimate {
        output_product: KernelEstimate::from_samples(&products, cfg.width)?,
        gradient_inner: KernelEstimate::from_samples(&inners, cfg.width)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::forward::{forward, gradient};
    use crate::oracle::weights::NetworkWeights;

    fn params(depth: usize) -> HyperParams {
        HyperParams::new(std::f64::consts::SQRT_2, 0.5, 0.1, 1.0, depth).unwrap()
    }

    #[test]
    fn estimate_statistics() {
        let e = KernelEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0], 10).unwrap();
        assert_eq!(e.mean, 2.5);
        assert!((e.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(KernelEstimate::from_samples(&[1.0], 10).is_err());
        assert_eq!(e.z_score(2.5), 0.0);
    }

    #[test]
    fn one_trial_is_rejected() {
        let cfg = OracleConfig { width: 8, trials: 1, seed: 0 };
        assert!(empirical_ck(&[1.0], &[1.0], &params(1), Variant::RNN, &cfg).is_err());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = OracleConfig { width: 32, trials: 4, seed: 77 };
        let x = [0.5, -0.5, 0.7];
        let y = [0.1, 0.2, -0.9];
        let a = empirical_kernels(&x, &y, &params(2), &Variant::ALL, &cfg).unwrap();
        let b = empirical_kernels(&x, &y, &params(2), &Variant::ALL, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shared_draws_match_direct_network_evaluation() {
        let cfg = OracleConfig { width: 9, trials: 2, seed: 5 };
        let p = params(2);
        let x = [0.5, -0.5, 0.7];
        let y = [0.1, 0.2, -0.9];
        let est = empirical_kernels(&x, &y, &p, &[Variant::BI_RNN_AVG], &cfg).unwrap();
        let mut ck = Vec::new();
        let mut ntk = Vec::new();
        for trial in 0..2 {
            let net = NetworkWeights::sample(9, 2, 3, derive_seed(5, trial)).unwrap();
            let fx = forward(&net, &p, &x, Variant::BI_RNN_AVG).unwrap().value;
            let fy = forward(&net, &p, &y, Variant::BI_RNN_AVG).unwrap().value;
            ck.push(fx * fy);
            let gx = gradient(&net, &p, &x, Variant::BI_RNN_AVG).unwrap();
            let gy = gradient(&net, &p, &y, Variant::BI_RNN_AVG).unwrap();
            ntk.push(gx.inner(&gy, &p));
        }
        let direct_ck = KernelEstimate::from_samples(&ck, 9).unwrap();
        let direct_ntk = KernelEstimate::from_samples(&ntk, 9).unwrap();
        assert!((est[0].ck.mean - direct_ck.mean).abs() < 1e-14);
        assert!((est[0].ntk.mean - direct_ntk.mean).abs() < 1e-12);
    }

    #[test]
    fn self_estimate_is_mean_square() {
        let cfg = OracleConfig { width: 16, trials: 5, seed: 3 };
        let x = [0.3, 0.4];
        let e = empirical_ck(&x, &x, &params(1), Variant::RNN, &cfg).unwrap();
        assert!(e.mean >= 0.0);
    }

    #[test]
    fn cross_head_arguments_are_checked() {
        let cfg = OracleConfig { width: 4, trials: 2, seed: 0 };
        let x = [0.1, 0.2, 0.3];
        assert!(cross_head_terms(&x, &x, &params(1), (2, 2), &cfg).is_err());
        assert!(cross_head_terms(&x, &x, &params(1), (0, 2), &cfg).is_err());
        assert!(cross_head_terms(&x, &x, &params(1), (1, 3), &cfg).is_ok());
    }
}
