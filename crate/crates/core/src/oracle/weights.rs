use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows generated from one PRNG stream; fixes the draw independently of the
/// thread count.
const ROWS_PER_STREAM: usize = 64;

/// SplitMix64 finalizer over a seed and a stream tag.
pub(crate) fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn normal_block(len: usize, row_len: usize, seed: u64) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let stream = ROWS_PER_STREAM * row_len.max(1);
    out.par_chunks_mut(stream)
        .enumerate()
        .for_each(|(k, chunk)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
            for v in chunk {
                *v = StandardNormal.sample(&mut rng);
            }
        });
    out
}

/// One draw of the parameters of a finite-width recurrent network.
///
/// Every entry is standard normal; the `sigma / sqrt(n)` scales are applied
/// where the weights are used.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnWeights {
    width: usize,
    depth: usize,
    steps: usize,
    /// `W(l)`, `n x n` row-major, one per layer.
    pub(crate) recurrent: Vec<Vec<f64>>,
    /// `U(1)`, `n x 1`.
    pub(crate) input_first: Vec<f64>,
    /// `U(l)` for `l >= 2`, `n x n` row-major.
    pub(crate) input_hidden: Vec<Vec<f64>>,
    /// `b(l)`, one per layer.
    pub(crate) bias: Vec<Vec<f64>>,
    /// `V(t)`, one `1 x n` head per step.
    pub(crate) heads: Vec<Vec<f64>>,
}

/// Draws `RnnWeights` for a network of the given width, depth and length.
/// Only scalar inputs per step are supported (`input_dim = 1`).
pub fn sample_rnn(width: usize, depth: usize, input_dim: usize, steps: usize, seed: u64) -> Result<RnnWeights> {
    if width == 0 {
        return Err(Error::InvalidConfig("width must be at least 1".into()));
    }
    if steps == 0 {
        return Err(Error::InvalidConfig("sequence length must be at least 1".into()));
    }
    if depth == 0 {
        return Err(Error::InvalidConfig("depth must be at least 1".into()));
    }
    if input_dim != 1 {
        return Err(Error::InvalidConfig(format!(
            "only one input feature per step is supported, got {input_dim}"
        )));
    }
    let n = width;
    let mut tag = 0u64;
    let mut next = |len: usize, row_len: usize| {
        tag += 1;
        normal_block(len, row_len, derive_seed(seed, tag))
    };
    let mut recurrent = Vec::with_capacity(depth);
    let mut input_hidden = Vec::with_capacity(depth.saturating_sub(1));
    let mut bias = Vec::with_capacity(depth);
    let mut input_first = Vec::new();
    for l in 0..depth {
        recurrent.push(next(n * n, n));
        if l == 0 {
            input_first = next(n, 1);
        } else {
            input_hidden.push(next(n * n, n));
        }
        bias.push(next(n, 1));
    }
    let heads = (0..steps).map(|_| next(n, 1)).collect();
    Ok(RnnWeights {
        width,
        depth,
        steps,
        recurrent,
        input_first,
        input_hidden,
        bias,
        heads,
    })
}

impl RnnWeights {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn recurrent(&self, layer: usize) -> &[f64] {
        &self.recurrent[layer]
    }

    pub fn head(&self, step: usize) -> &[f64] {
        &self.heads[step]
    }

    /// Parameter blocks in flattening order: per layer `W, U, b`, then the
    /// heads `V(1..T)`.
    pub(crate) fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in 0..self.depth {
            out.push(&self.recurrent[l]);
            out.push(if l == 0 { &self.input_first } else { &self.input_hidden[l - 1] });
            out.push(&self.bias[l]);
        }
        out.extend(self.heads.iter().map(Vec::as_slice));
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        let mut hidden = self.input_hidden.iter_mut();
        let mut first = Some(&mut self.input_first);
        for (l, (w, b)) in self.recurrent.iter_mut().zip(self.bias.iter_mut()).enumerate() {
            out.push(w);
            if l == 0 {
                out.push(first.take().expect("single first layer"));
            } else {
                out.push(hidden.next().expect("one input matrix per upper layer"));
            }
            out.push(b);
        }
        out.extend(self.heads.iter_mut().map(Vec::as_mut_slice));
        out
    }

    pub fn param_count(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn param(&self, index: usize) -> f64 {
        let mut k = index;
        for block in self.blocks() {
            if k < block.len() {
                return block[k];
            }
            k -= block.len();
        }
        panic!("parameter index {index} out of range");
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let mut k = index;
        for block in self.blocks_mut() {
            if k < block.len() {
                block[k] = value;
                return;
            }
            k -= block.len();
        }
        panic!("parameter index {index} out of range");
    }

    #[cfg(test)]
    fn all_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks().into_iter().flat_map(|b| b.iter().copied())
    }
}

/// Weights of both directions. The reversed network is an independent draw
/// and only contributes to bidirectional outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkWeights {
    pub forward: RnnWeights,
    pub backward: RnnWeights,
}

impl NetworkWeights {
    pub fn sample(width: usize, depth: usize, steps: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            forward: sample_rnn(width, depth, 1, steps, derive_seed(seed, 0xF0))?,
            backward: sample_rnn(width, depth, 1, steps, derive_seed(seed, 0xB0))?,
        })
    }

    pub fn param_count(&self) -> usize {
        self.forward.param_count() + self.backward.param_count()
    }

    /// Flat parameter access: forward network first, then backward.
    pub fn param(&self, index: usize) -> f64 {
        let split = self.forward.param_count();
        if index < split {
            self.forward.param(index)
        } else {
            self.backward.param(index - split)
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let split = self.forward.param_count();
        if index < split {
            self.forward.set_param(index, value)
        } else {
            self.backward.set_param(index - split, value)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_weights() {
        let a = sample_rnn(17, 2, 1, 3, 42).unwrap();
        let b = sample_rnn(17, 2, 1, 3, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_configurations() {
        assert!(matches!(sample_rnn(0, 1, 1, 3, 0), Err(Error::InvalidConfig(_))));
        assert!(matches!(sample_rnn(4, 1, 1, 0, 0), Err(Error::InvalidConfig(_))));
        assert!(matches!(sample_rnn(4, 1, 2, 3, 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn parameter_layout() {
        let n = 5;
        let w = sample_rnn(n, 2, 1, 3, 1).unwrap();
        // W1 U1 b1, W2 U2 b2, V1..V3
        assert_eq!(w.param_count(), (n * n + n + n) + (2 * n * n + n) + 3 * n);
        assert_eq!(w.param(0), w.recurrent[0][0]);
        assert_eq!(w.param(n * n), w.input_first[0]);
        assert_eq!(w.param(n * n + n + n + n * n), w.input_hidden[0][0]);
        let mut m = w.clone();
        let last = m.param_count() - 1;
        m.set_param(last, 7.0);
        assert_eq!(m.heads[2][n - 1], 7.0);
    }

    #[test]
    fn large_draw_is_centered() {
        let n = 10_000;
        let w = sample_rnn(n, 1, 1, 1, 9).unwrap();
        let mean = w.recurrent[0].iter().sum::<f64>() / (n * n) as f64;
        assert!(mean.abs() < 4.0 / n as f64, "mean {mean}");
        let var = w.recurrent[0].iter().map(|v| v * v).sum::<f64>() / (n * n) as f64;
        assert!((var - 1.0).abs() < 1e-3, "variance {var}");
    }

    #[test]
    fn different_seeds_are_uncorrelated() {
        let a: Vec<f64> = sample_rnn(100, 1, 1, 2, 1).unwrap().all_values().collect();
        let b: Vec<f64> = sample_rnn(100, 1, 1, 2, 2).unwrap().all_values().collect();
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((dot / (na * nb)).abs() < 0.05);
    }
}
