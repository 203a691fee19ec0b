//! Per-pair CK/NTK recursions over depth and time.
//!
//! At every `(layer, step)` the pre-activation covariance `sigma` and the
//! pre-activation tangent kernel `psi` of a pair are advanced from two
//! neighbours: the same layer one step earlier (recurrent weights) and the
//! layer below at the same step (input weights). The step kernels are read
//! off the top layer:
//!
//! ```text
//! ck_t  = sigma_v^2 Vphi[K(L, t)]
//! ntk_t = ck_t + sigma_v^2 psi(L, t) Vphi'[K(L, t)]
//! ```
//!
//! The last-step values give the plain RNN kernels; their running sums give
//! the average-pooling kernels.

use serde::{Deserialize, Serialize};

use super::params::HyperParams;
use super::vphi::relu_moments;
use crate::error::{Error, Result};

/// `Vphi` and `Vphi'` of one 2x2 covariance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct Moments {
    pub value: f64,
    pub slope: f64,
}

#[inline]
pub(crate) fn moments(k_xx: f64, k_yy: f64, k_xy: f64) -> Moments {
    let (value, slope) = relu_moments(k_xx, k_yy, k_xy);
    Moments { value, slope }
}

/// Covariance of the next pre-activation. `lower` is `x_t x'_t` on the first
/// layer and `Vphi` of the layer below otherwise; `recurrent` is `Vphi` of
/// the same layer one step back, absent on the first step.
#[inline]
pub(crate) fn next_sigma(p: &HyperParams, lower: f64, recurrent: Option<f64>) -> f64 {
    let mut s = p.sigma_u * p.sigma_u * lower;
    if let Some(v) = recurrent {
        s += p.sigma_w * p.sigma_w * v;
    }
    s + p.sigma_b * p.sigma_b
}

/// Tangent kernel of the next pre-activation; the optional pairs are
/// `(psi, Vphi')` of the recurrent and lower neighbours.
#[inline]
pub(crate) fn next_psi(
    p: &HyperParams,
    sigma: f64,
    recurrent: Option<(f64, f64)>,
    lower: Option<(f64, f64)>,
) -> f64 {
    let mut psi = sigma;
    if let Some((prev, slope)) = recurrent {
        psi += p.sigma_w * p.sigma_w * prev * slope;
    }
    if let Some((below, slope)) = lower {
        psi += p.sigma_u * p.sigma_u * below * slope;
    }
    psi
}

/// `(ck_t, ntk_t)` from the top layer.
#[inline]
pub(crate) fn step_output(p: &HyperParams, top: Moments, psi_top: f64) -> (f64, f64) {
    let v2 = p.sigma_v * p.sigma_v;
    let ck = v2 * top.value;
    (ck, ck + v2 * psi_top * top.slope)
}

/// Scalar kernels of one input pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairOutputs {
    /// CK of the single last-step head.
    pub ck_last: f64,
    /// NTK of the single last-step head.
    pub ntk_last: f64,
    /// Sum of the per-step CKs (average pooling).
    pub ck_avg: f64,
    /// Sum of the per-step NTKs (average pooling).
    pub ntk_avg: f64,
}

/// Per-step intermediate values, for inspection and tests.
#[derive(Clone, Debug, PartialEq)]
pub struct StepTrace {
    /// `Sigma(layer, t)(x, x')` for every layer.
    pub sigma: Vec<f64>,
    /// `Psi(layer, t)(x, x')` for every layer.
    pub psi: Vec<f64>,
    pub ck: f64,
    pub ntk: f64,
}

pub(crate) fn check_inputs(x: &[f64], y: &[f64], params: &HyperParams) -> Result<()> {
    params.validate()?;
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "input lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Shape("inputs must have at least one step".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("inputs contain non-finite values".into()));
    }
    Ok(())
}

/// Reference evaluation of all four scalar kernels for one pair.
pub fn kernel_pair(x: &[f64], y: &[f64], params: &HyperParams) -> Result<PairOutputs> {
    let trace = pair_trace(x, y, params)?;
    let last = trace.last().expect("at least one step");
    Ok(PairOutputs {
        ck_last: last.ck,
        ntk_last: last.ntk,
        ck_avg: trace.iter().map(|s| s.ck).sum(),
        ntk_avg: trace.iter().map(|s| s.ntk).sum(),
    })
}

/// Runs the pair recursion and records every step.
pub fn pair_trace(x: &[f64], y: &[f64], params: &HyperParams) -> Result<Vec<StepTrace>> {
    check_inputs(x, y, params)?;
    let depth = params.depth;
    let mut sxx = vec![0.0; depth];
    let mut syy = vec![0.0; depth];
    let mut sxy = vec![0.0; depth];
    let mut psi = vec![0.0; depth];
    let mut steps = Vec::with_capacity(x.len());

    for t in 0..x.len() {
        for l in 0..depth {
            let (lower_xx, lower_yy, lower_xy, lower_psi) = if l == 0 {
                (x[t] * x[t], y[t] * y[t], x[t] * y[t], None)
            } else {
                let m = moments(sxx[l - 1], syy[l - 1], sxy[l - 1]);
                (
                    moments(sxx[l - 1], sxx[l - 1], sxx[l - 1]).value,
                    moments(syy[l - 1], syy[l - 1], syy[l - 1]).value,
                    m.value,
                    Some((psi[l - 1], m.slope)),
                )
            };
            let (rec_xx, rec_yy, rec_xy) = if t == 0 {
                (None, None, None)
            } else {
                (
                    Some(moments(sxx[l], sxx[l], sxx[l])),
                    Some(moments(syy[l], syy[l], syy[l])),
                    Some(moments(sxx[l], syy[l], sxy[l])),
                )
            };
            let new_xy = next_sigma(params, lower_xy, rec_xy.map(|m| m.value));
            psi[l] = next_psi(
                params,
                new_xy,
                rec_xy.map(|m| (psi[l], m.slope)),
                lower_psi,
            );
            sxx[l] = next_sigma(params, lower_xx, rec_xx.map(|m| m.value));
            syy[l] = next_sigma(params, lower_yy, rec_yy.map(|m| m.value));
            sxy[l] = new_xy;
        }
        let top = moments(sxx[depth - 1], syy[depth - 1], sxy[depth - 1]);
        let (ck, ntk) = step_output(params, top, psi[depth - 1]);
        steps.push(StepTrace {
            sigma: sxy.clone(),
            psi: psi.clone(),
            ck,
            ntk,
        });
    }
    Ok(steps)
}
