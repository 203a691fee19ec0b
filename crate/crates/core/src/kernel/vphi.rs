//! Closed-form Gaussian expectations of the ReLU and its derivative.
//!
//! For `(z1, z2) ~ N(0, [[k1, k3], [k3, k2]])` with correlation
//! `c = k3 / sqrt(k1 k2)`:
//!
//! ```text
//! E[relu(z1) relu(z2)] = (c (pi - acos c) + sqrt(1 - c^2)) sqrt(k1 k2) / (2 pi)
//! E[step(z1) step(z2)] = (pi - acos c) / (2 pi)
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2x2 covariance `[[k1, k3], [k3, k2]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cov2 {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl Cov2 {
    pub fn new(k1: f64, k2: f64, k3: f64) -> Result<Self> {
        let cov = Self { k1, k2, k3 };
        cov.validate()?;
        Ok(cov)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k1.is_finite() && self.k2.is_finite() && self.k3.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite covariance {self:?}")));
        }
        if self.k1 < 0.0 || self.k2 < 0.0 {
            return Err(Error::InvalidInput(format!("negative variance in {self:?}")));
        }
        Ok(())
    }

    /// Correlation clamped to [-1, 1]; `None` when a variance is zero.
    pub fn correlation(&self) -> Option<f64> {
        let scale = (self.k1 * self.k2).sqrt();
        (scale > 0.0).then(|| (self.k3 / scale).clamp(-1.0, 1.0))
    }
}

/// `E[relu(z1) relu(z2)]`.
pub fn vphi(cov: Cov2) -> Result<f64> {
    cov.validate()?;
    Ok(relu_moments(cov.k1, cov.k2, cov.k3).0)
}

/// `E[relu'(z1) relu'(z2)]`.
pub fn vphi_prime(cov: Cov2) -> Result<f64> {
    cov.validate()?;
    Ok(relu_moments(cov.k1, cov.k2, cov.k3).1)
}

/// Both expectations at once, sharing the `acos`. Inputs are not validated;
/// this is the form the recursions call in their inner loops.
///
/// A zero variance yields `(0, 1/4)`: `relu(0) = 0` kills the first moment and
/// the derivative term takes its uncorrelated limit.
#[inline]
pub(crate) fn relu_moments(k1: f64, k2: f64, k3: f64) -> (f64, f64) {
    let scale = (k1 * k2).sqrt();
    if scale <= 0.0 {
        return (0.0, 0.25);
    }
    let c = (k3 / scale).clamp(-1.0, 1.0);
    let angle = PI - c.acos();
    let value = (c * angle + (1.0 - c * c).sqrt()) * scale / (2.0 * PI);
    (value, angle / (2.0 * PI))
}
