use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    #[default]
    Relu,
}

/// Initialization scales and depth of the recurrent network.
///
/// `sigma_w` scales the recurrent weights, `sigma_u` the input weights,
/// `sigma_b` the biases and `sigma_v` the output heads.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub sigma_w: f64,
    pub sigma_u: f64,
    pub sigma_b: f64,
    pub sigma_v: f64,
    pub depth: usize,
    #[serde(default)]
    pub activation: Activation,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            sigma_w: std::f64::consts::SQRT_2,
            sigma_u: 0.5,
            sigma_b: 0.1,
            sigma_v: 1.0,
            depth: 1,
            activation: Activation::Relu,
        }
    }
}

impl HyperParams {
    pub fn new(sigma_w: f64, sigma_u: f64, sigma_b: f64, sigma_v: f64, depth: usize) -> Result<Self> {
        let params = Self {
            sigma_w,
            sigma_u,
            sigma_b,
            sigma_v,
            depth,
            activation: Activation::Relu,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("sigma_w", self.sigma_w),
            ("sigma_u", self.sigma_u),
            ("sigma_b", self.sigma_b),
            ("sigma_v", self.sigma_v),
        ];
        for (name, value) in named {
            if !value.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be finite, got {value}")));
            }
        }
        for (name, value) in [named[0], named[1], named[3]] {
            if value <= 0.0 {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {value}")));
            }
        }
        if self.sigma_b < 0.0 {
            return Err(Error::InvalidInput(format!(
                "sigma_b must be nonnegative, got {}",
                self.sigma_b
            )));
        }
        if self.depth == 0 {
            return Err(Error::InvalidInput("depth must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_sigma_v(self, sigma_v: f64) -> Self {
        Self { sigma_v, ..self }
    }
}

/// Output architecture of the recurrent network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Architecture {
    /// Single output head at the last step.
    Rnn,
    /// Forward and reversed networks with summed last-step outputs.
    BiRnn,
    /// Sum of independent output heads at every step.
    RnnAvg,
    /// Pooled heads on both directions.
    BiRnnAvg,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [Self::Rnn, Self::BiRnn, Self::RnnAvg, Self::BiRnnAvg];

    pub fn is_bidirectional(self) -> bool {
        matches!(self, Self::BiRnn | Self::BiRnnAvg)
    }

    pub fn is_pooled(self) -> bool {
        matches!(self, Self::RnnAvg | Self::BiRnnAvg)
    }

    /// The one-directional architecture a bidirectional kernel is built from.
    pub fn base(self) -> Self {
        match self {
            Self::Rnn | Self::BiRnn => Self::Rnn,
            Self::RnnAvg | Self::BiRnnAvg => Self::RnnAvg,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Rnn => "rnn",
            Self::BiRnn => "bi-rnn",
            Self::RnnAvg => "rnn-avg",
            Self::BiRnnAvg => "bi-rnn-avg",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InputOrder {
    #[default]
    Default,
    Flipped,
}

/// Architecture plus the ordering its inputs are fed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Variant {
    pub arch: Architecture,
    pub order: InputOrder,
}

impl Variant {
    pub const RNN: Variant = Variant::new(Architecture::Rnn);
    pub const BI_RNN: Variant = Variant::new(Architecture::BiRnn);
    pub const RNN_AVG: Variant = Variant::new(Architecture::RnnAvg);
    pub const BI_RNN_AVG: Variant = Variant::new(Architecture::BiRnnAvg);
    pub const ALL: [Variant; 4] = [Self::RNN, Self::BI_RNN, Self::RNN_AVG, Self::BI_RNN_AVG];

    pub const fn new(arch: Architecture) -> Self {
        Self {
            arch,
            order: InputOrder::Default,
        }
    }

    /// Bidirectional variants see both orders internally, so the order is
    /// normalized to `Default` for them.
    pub fn with_order(self, order: InputOrder) -> Self {
        let order = if self.arch.is_bidirectional() {
            InputOrder::Default
        } else {
            order
        };
        Self { order, ..self }
    }

    pub fn flipped(self) -> Self {
        self.with_order(InputOrder::Flipped)
    }

    pub fn is_flipped(self) -> bool {
        !self.arch.is_bidirectional() && self.order == InputOrder::Flipped
    }

    /// One-byte code used in gram files: bits 0-1 hold the architecture,
    /// bit 2 the flipped input order.
    pub fn code(self) -> u8 {
        let arch = match self.arch {
            Architecture::Rnn => 0,
            Architecture::BiRnn => 1,
            Architecture::RnnAvg => 2,
            Architecture::BiRnnAvg => 3,
        };
        arch | if self.is_flipped() { 4 } else { 0 }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        if code > 7 {
            return Err(Error::Format(format!("unknown variant code {code}")));
        }
        let arch = Architecture::ALL[(code & 3) as usize];
        let v = Variant::new(arch);
        Ok(if code & 4 != 0 { v.flipped() } else { v })
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.arch.name())?;
        if self.is_flipped() {
            f.write_str("-flip")?;
        }
        Ok(())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase().replace('_', "-");
        let (name, flipped) = match lower.strip_suffix("-flip") {
            Some(base) => (base.to_string(), true),
            None => (lower, false),
        };
        let arch = Architecture::ALL
            .into_iter()
            .find(|a| a.name() == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown variant '{s}'")))?;
        let v = Variant::new(arch);
        Ok(if flipped { v.flipped() } else { v })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_scales() {
        assert!(HyperParams::new(0.0, 0.5, 0.1, 1.0, 1).is_err());
        assert!(HyperParams::new(1.0, 0.5, -0.1, 1.0, 1).is_err());
        assert!(HyperParams::new(1.0, f64::NAN, 0.1, 1.0, 1).is_err());
        assert!(HyperParams::new(1.0, 0.5, 0.1, 1.0, 0).is_err());
        assert!(HyperParams::new(1.0, 0.5, 0.0, 1.0, 1).is_ok());
    }

    #[test]
    fn bidirectional_ignores_order() {
        assert_eq!(Variant::BI_RNN.flipped(), Variant::BI_RNN);
        assert!(Variant::RNN.flipped().is_flipped());
    }

    #[test]
    fn codes_and_names_round_trip() {
        for v in Variant::ALL {
            for order in [InputOrder::Default, InputOrder::Flipped] {
                let v = v.with_order(order);
                assert_eq!(Variant::from_code(v.code()).unwrap(), v);
                assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
            }
        }
        assert!("lstm".parse::<Variant>().is_err());
    }
}
