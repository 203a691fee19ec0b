use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Architecture, HyperParams, KernelKind, Variant};

/// Output scale that keeps each architecture's kernel on a common footing.
pub fn sigma_v_for(variant: Variant, length: usize) -> f64 {
    let t = length as f64;
    match variant.arch {
        Architecture::Rnn => 1.0,
        Architecture::BiRnn => 1.0 / 2f64.sqrt(),
        Architecture::RnnAvg => 1.0 / t.sqrt(),
        Architecture::BiRnnAvg => 1.0 / (2.0 * t).sqrt(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub sigma_u: Vec<f64>,
    pub sigma_b: Vec<f64>,
    pub depth: Vec<usize>,
    pub c: Vec<f64>,
    pub sigma_w: f64,
    /// RBF bandwidths `g`, with `gamma = g / T`.
    pub rbf_scale: Vec<f64>,
    pub poly_degree: Vec<u32>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            sigma_u: vec![0.25, 0.5],
            sigma_b: vec![0.001, 0.1],
            depth: vec![1, 2],
            c: vec![0.01, 1.0, 100.0, 1e4, 1e6],
            sigma_w: 2f64.sqrt(),
            rbf_scale: vec![0.1, 0.3, 1.0, 3.0, 10.0],
            poly_degree: vec![2, 3],
        }
    }
}

impl HyperGrid {
    /// Configurations per recurrent variant and ordering.
    pub fn recurrent_count(&self) -> usize {
        self.sigma_u.len() * self.sigma_b.len() * self.depth.len() * self.c.len() * KernelKind::BOTH.len()
    }

    /// Kernel hyperparameters with `sigma_v = 1`.
    pub fn recurrent_params(&self) -> Result<Vec<HyperParams>> {
        let mut out = Vec::new();
        for &su in &self.sigma_u {
            for &sb in &self.sigma_b {
                for &l in &self.depth {
                    out.push(HyperParams::new(self.sigma_w, su, sb, 1.0, l)?);
                }
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.c.iter().any(|&c| !(c.is_finite() && c > 0.0)) {
            return Err(Error::InvalidConfig("C values must be positive".into()));
        }
        if self.rbf_scale.iter().any(|&g| !(g.is_finite() && g > 0.0)) {
            return Err(Error::InvalidConfig("RBF scales must be positive".into()));
        }
        self.recurrent_params().map(|_| ())
    }
}

/// A column of the benchmark table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Method {
    Rnn,
    BiRnn,
    RnnAvg,
    BiRnnAvg,
    /// Plain and pooled RNN with the input order as a validated choice.
    RnnP,
    Rbf,
    Polynomial,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Rnn,
        Method::BiRnn,
        Method::RnnAvg,
        Method::BiRnnAvg,
        Method::RnnP,
        Method::Rbf,
        Method::Polynomial,
    ];

    /// Recurrent variants (with orderings) searched by this method.
    pub fn variants(self) -> Vec<Variant> {
        match self {
            Method::Rnn => vec![Variant::RNN],
            Method::BiRnn => vec![Variant::BI_RNN],
            Method::RnnAvg => vec![Variant::RNN_AVG],
            Method::BiRnnAvg => vec![Variant::BI_RNN_AVG],
            Method::RnnP => vec![
                Variant::RNN,
                Variant::RNN.flipped(),
                Variant::RNN_AVG,
                Variant::RNN_AVG.flipped(),
            ],
            Method::Rbf | Method::Polynomial => vec![],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Rnn => "rnn",
            Method::BiRnn => "bi-rnn",
            Method::RnnAvg => "rnn-avg",
            Method::BiRnnAvg => "bi-rnn-avg",
            Method::RnnP => "rnn-p",
            Method::Rbf => "rbf",
            Method::Polynomial => "polynomial",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "poly" {
            return Ok(Method::Polynomial);
        }
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.name().to_owned()
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Parses a comma-separated method list, keeping the canonical order.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut out: Vec<Method> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    out.sort_unstable();
    out.dedup();
    if out.is_empty() {
        return Err(Error::InvalidConfig("no methods selected".into()));
    }
    Ok(out)
}

/// Kernel part of a configuration; `C` is carried separately.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "kebab-case")]
pub enum KernelChoice {
    Recurrent {
        variant: Variant,
        sigma_u: f64,
        sigma_b: f64,
        depth: usize,
        kind: KernelKind,
    },
    Rbf {
        scale: f64,
    },
    Polynomial {
        degree: u32,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    #[serde(flatten)]
    pub kernel: KernelChoice,
    pub c: f64,
}

/// Every configuration of `method` in grid order.
pub fn configurations(method: Method, grid: &HyperGrid) -> Result<Vec<Config>> {
    let mut kernels = Vec::new();
    match method {
        Method::Rbf => kernels.extend(grid.rbf_scale.iter().map(|&scale| KernelChoice::Rbf { scale })),
        Method::Polynomial => {
            kernels.extend(grid.poly_degree.iter().map(|&degree| KernelChoice::Polynomial { degree }))
        }
        _ => {
            for variant in method.variants() {
                for p in grid.recurrent_params()? {
                    for kind in KernelKind::BOTH {
                        kernels.push(KernelChoice::Recurrent {
                            variant,
                            sigma_u: p.sigma_u,
                            sigma_b: p.sigma_b,
                            depth: p.depth,
                            kind,
                        });
                    }
                }
            }
        }
    }
    Ok(kernels
        .into_iter()
        .flat_map(|kernel| grid.c.iter().map(move |&c| Config { kernel, c }))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_v_values() {
        assert_eq!(sigma_v_for(Variant::RNN, 17), 1.0);
        assert_eq!(sigma_v_for(Variant::RNN.flipped(), 3), 1.0);
        assert!((sigma_v_for(Variant::BI_RNN, 9) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(sigma_v_for(Variant::RNN_AVG, 4), 0.5);
        assert_eq!(sigma_v_for(Variant::BI_RNN_AVG, 2), 0.5);
    }

    #[test]
    fn grid_sizes() {
        let g = HyperGrid::default();
        assert_eq!(g.recurrent_count(), 80);
        assert_eq!(configurations(Method::Rnn, &g).unwrap().len(), 80);
        assert_eq!(configurations(Method::RnnP, &g).unwrap().len(), 320);
        assert_eq!(configurations(Method::Rbf, &g).unwrap().len(), 25);
        assert_eq!(configurations(Method::Polynomial, &g).unwrap().len(), 10);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!(parse_methods("rbf, rnn-p,rbf").unwrap(), vec![Method::RnnP, Method::Rbf]);
        assert!(parse_methods("mlp").is_err());
        assert!(parse_methods("").is_err());
    }
}
