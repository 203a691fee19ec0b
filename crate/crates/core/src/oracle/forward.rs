//! Forward pass and backpropagation through time of a finite-width RNN.

use rayon::prelude::*;

use super::weights::{NetworkWeights, RnnWeights};
use crate::error::{Error, Result};
use crate::kernel::{flip, HyperParams, Variant};

const PAR_ROWS: usize = 128;

/// `y = A x` for a square row-major `A`.
fn matvec(a: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut y = vec![0.0; n];
    y.par_chunks_mut(PAR_ROWS).enumerate().for_each(|(k, out)| {
        for (r, yi) in out.iter_mut().enumerate() {
            let row = &a[(k * PAR_ROWS + r) * n..(k * PAR_ROWS + r + 1) * n];
            *yi = row.iter().zip(x).map(|(p, q)| p * q).sum();
        }
    });
    y
}

/// `y = A^T x` for a square row-major `A`; partial sums are reduced in a
/// fixed order.
fn matvec_t(a: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let partials: Vec<Vec<f64>> = x
        .par_chunks(PAR_ROWS)
        .enumerate()
        .map(|(k, xs)| {
            let mut acc = vec![0.0; n];
            for (r, &xi) in xs.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let row = &a[(k * PAR_ROWS + r) * n..(k * PAR_ROWS + r + 1) * n];
                acc.iter_mut().zip(row).for_each(|(s, w)| *s += xi * w);
            }
            acc
        })
        .collect();
    let mut y = vec![0.0; n];
    for p in partials {
        y.iter_mut().zip(p).for_each(|(s, v)| *s += v);
    }
    y
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Pre-activations, hidden states and per-step outputs of one network on one
/// input.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    /// `pre[l][t - 1] = g(l, t)`.
    pre: Vec<Vec<Vec<f64>>>,
    /// `hidden[l][t] = h(l, t)`, with `hidden[l][0]` the zero initial state.
    hidden: Vec<Vec<Vec<f64>>>,
    /// `outputs[t - 1] = f(t)`.
    outputs: Vec<f64>,
    input: Vec<f64>,
}

impl ForwardTrace {
    /// `g(layer, t)` for `t` in `1..=T` (layers are 0-based).
    pub fn pre(&self, layer: usize, t: usize) -> &[f64] {
        &self.pre[layer][t - 1]
    }

    /// `h(layer, t)` for `t` in `0..=T`.
    pub fn hidden(&self, layer: usize, t: usize) -> &[f64] {
        &self.hidden[layer][t]
    }

    /// Per-step head outputs `f(1..T)`.
    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn steps(&self) -> usize {
        self.outputs.len()
    }

    pub fn depth(&self) -> usize {
        self.pre.len()
    }

    /// The sequence actually fed to the network.
    pub fn input(&self) -> &[f64] {
        &self.input
    }
}

/// Runs one directional network on `x`.
pub fn run_rnn(weights: &RnnWeights, params: &HyperParams, x: &[f64]) -> Result<ForwardTrace> {
    params.validate()?;
    if x.len() != weights.steps() {
        return Err(Error::Shape(format!(
            "input has {} steps, network expects {}",
            x.len(),
            weights.steps()
        )));
    }
    if params.depth != weights.depth() {
        return Err(Error::Shape(format!(
            "params have depth {}, weights {}",
            params.depth,
            weights.depth()
        )));
    }
    let n = weights.width();
    let root_n = (n as f64).sqrt();
    let sw = params.sigma_w / root_n;
    let su_hidden = params.sigma_u / root_n;
    let depth = weights.depth();
    let steps = x.len();

    let mut pre = vec![Vec::with_capacity(steps); depth];
    let mut hidden = vec![vec![vec![0.0; n]]; depth];
    let mut outputs = Vec::with_capacity(steps);

    for t in 1..=steps {
        for l in 0..depth {
            let mut g = if t > 1 {
                let mut r = matvec(&weights.recurrent[l], &hidden[l][t - 1]);
                r.iter_mut().for_each(|v| *v *= sw);
                r
            } else {
                vec![0.0; n]
            };
            if l == 0 {
                let xt = x[t - 1];
                g.iter_mut()
                    .zip(&weights.input_first)
                    .for_each(|(v, u)| *v += params.sigma_u * u * xt);
            } else {
                let below = matvec(&weights.input_hidden[l - 1], &hidden[l - 1][t]);
                g.iter_mut().zip(below).for_each(|(v, u)| *v += su_hidden * u);
            }
            g.iter_mut()
                .zip(&weights.bias[l])
                .for_each(|(v, b)| *v += params.sigma_b * b);
            let h = g.iter().map(|&v| v.max(0.0)).collect();
            pre[l].push(g);
            hidden[l].push(h);
        }
        let top = &hidden[depth - 1][t];
        outputs.push(params.sigma_v / root_n * dot(&weights.heads[t - 1], top));
    }
    Ok(ForwardTrace {
        pre,
        hidden,
        outputs,
        input: x.to_vec(),
    })
}

/// Which per-step heads feed the scalar output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadMask(Vec<bool>);

impl HeadMask {
    pub fn last(steps: usize) -> Self {
        Self((1..=steps).map(|t| t == steps).collect())
    }

    pub fn all(steps: usize) -> Self {
        Self(vec![true; steps])
    }

    /// Only head `t` (1-based).
    pub fn single(steps: usize, t: usize) -> Self {
        Self((1..=steps).map(|s| s == t).collect())
    }

    pub fn for_variant(variant: Variant, steps: usize) -> Self {
        if variant.arch.is_pooled() {
            Self::all(steps)
        } else {
            Self::last(steps)
        }
    }

    pub fn is_active(&self, t: usize) -> bool {
        self.0[t - 1]
    }

    pub fn apply(&self, trace: &ForwardTrace) -> f64 {
        trace
            .outputs
            .iter()
            .zip(&self.0)
            .filter(|(_, &on)| on)
            .map(|(v, _)| v)
            .sum()
    }
}

/// Output of a (possibly bidirectional) network on one input.
#[derive(Clone, Debug)]
pub struct NetworkOutput {
    pub forward: ForwardTrace,
    /// Trace of the reversed network on the reversed input, for
    /// bidirectional variants.
    pub backward: Option<ForwardTrace>,
    pub value: f64,
}

/// Scalar output of `variant` on `x`.
pub fn forward(net: &NetworkWeights, params: &HyperParams, x: &[f64], variant: Variant) -> Result<NetworkOutput> {
    let steps = net.forward.steps();
    let mask = HeadMask::for_variant(variant, steps);
    let fed = if variant.is_flipped() { flip(x) } else { x.to_vec() };
    let fwd = run_rnn(&net.forward, params, &fed)?;
    let mut value = mask.apply(&fwd);
    let backward = if variant.arch.is_bidirectional() {
        let bwd = run_rnn(&net.backward, params, &flip(x))?;
        value += mask.apply(&bwd);
        Some(bwd)
    } else {
        None
    };
    Ok(NetworkOutput {
        forward: fwd,
        backward,
        value,
    })
}

/// Gradient of a masked output with respect to one network's parameters,
/// kept in factored form: `delta[l][t - 1]` is `d output / d g(l, t)`.
#[derive(Clone, Debug)]
pub struct TapeGradient {
    trace: ForwardTrace,
    mask: HeadMask,
    delta: Vec<Vec<Vec<f64>>>,
}

/// Backpropagation through time.
///
/// The ReLU derivative at exactly 0 is taken as 0.
pub fn backprop(weights: &RnnWeights, params: &HyperParams, trace: &ForwardTrace, mask: &HeadMask) -> TapeGradient {
    let n = weights.width();
    let root_n = (n as f64).sqrt();
    let depth = trace.depth();
    let steps = trace.steps();
    let mut delta = vec![vec![Vec::new(); steps]; depth];

    for t in (1..=steps).rev() {
        for l in (0..depth).rev() {
            let mut dh = vec![0.0; n];
            if l == depth - 1 && mask.is_active(t) {
                let s = params.sigma_v / root_n;
                dh.iter_mut()
                    .zip(&weights.heads[t - 1])
                    .for_each(|(d, v)| *d += s * v);
            }
            if l + 1 < depth {
                let up = matvec_t(&weights.input_hidden[l], &delta[l + 1][t - 1]);
                let s = params.sigma_u / root_n;
                dh.iter_mut().zip(up).for_each(|(d, u)| *d += s * u);
            }
            if t < steps {
                let next = matvec_t(&weights.recurrent[l], &delta[l][t]);
                let s = params.sigma_w / root_n;
                dh.iter_mut().zip(next).for_each(|(d, u)| *d += s * u);
            }
            let g = trace.pre(l, t);
            dh.iter_mut()
                .zip(g)
                .for_each(|(d, &gv)| if gv <= 0.0 { *d = 0.0 });
            delta[l][t - 1] = dh;
        }
    }
    TapeGradient {
        trace: trace.clone(),
        mask: mask.clone(),
        delta,
    }
}

impl TapeGradient {
    pub fn delta(&self, layer: usize, t: usize) -> &[f64] {
        &self.delta[layer][t - 1]
    }

    /// `<grad_theta out(x), grad_theta out(x')>` over one network's
    /// parameters, both gradients taken at the same weights.
    pub fn inner(&self, other: &TapeGradient, params: &HyperParams) -> f64 {
        let (a, b) = (self, other);
        let n = a.trace.hidden(0, 0).len() as f64;
        let depth = a.trace.depth();
        let steps = a.trace.steps();
        let sw2 = params.sigma_w * params.sigma_w;
        let su2 = params.sigma_u * params.sigma_u;
        let sb2 = params.sigma_b * params.sigma_b;
        let sv2 = params.sigma_v * params.sigma_v;

        let mut total = 0.0;
        for l in 0..depth {
            let dd: Vec<Vec<f64>> = (1..=steps)
                .map(|t| (1..=steps).map(|s| dot(a.delta(l, t), b.delta(l, s))).collect())
                .collect();
            // W(l): sum_t delta(l,t) h(l,t-1)^T scaled by sigma_w / sqrt(n)
            for t in 2..=steps {
                for s in 2..=steps {
                    total += sw2 / n
                        * dd[t - 1][s - 1]
                        * dot(a.trace.hidden(l, t - 1), b.trace.hidden(l, s - 1));
                }
            }
            // U(l)
            if l == 0 {
                let xa = a.trace.input();
                let xb = b.trace.input();
                for t in 1..=steps {
                    for s in 1..=steps {
                        total += su2 * dd[t - 1][s - 1] * xa[t - 1] * xb[s - 1];
                    }
                }
            } else {
                for t in 1..=steps {
                    for s in 1..=steps {
                        total += su2 / n
                            * dd[t - 1][s - 1]
                            * dot(a.trace.hidden(l - 1, t), b.trace.hidden(l - 1, s));
                    }
                }
            }
            // b(l)
            let bias: f64 = dd.iter().flatten().sum();
            total += sb2 * bias;
        }
        for t in 1..=steps {
            if a.mask.is_active(t) && b.mask.is_active(t) {
                total += sv2 / n * dot(a.trace.hidden(depth - 1, t), b.trace.hidden(depth - 1, t));
            }
        }
        total
    }

    /// Materialized gradient in `RnnWeights` parameter order. Sized
    /// `O(L n^2)`; meant for small widths.
    pub fn flatten(&self, params: &HyperParams) -> Vec<f64> {
        let n = self.trace.hidden(0, 0).len();
        let root_n = (n as f64).sqrt();
        let depth = self.trace.depth();
        let steps = self.trace.steps();
        let mut out = Vec::new();
        for l in 0..depth {
            let mut w = vec![0.0; n * n];
            for t in 2..=steps {
                let d = self.delta(l, t);
                let h = self.trace.hidden(l, t - 1);
                for i in 0..n {
                    for j in 0..n {
                        w[i * n + j] += params.sigma_w / root_n * d[i] * h[j];
                    }
                }
            }
            out.extend(w);
            if l == 0 {
                let mut u = vec![0.0; n];
                for t in 1..=steps {
                    let xt = self.trace.input()[t - 1];
                    u.iter_mut()
                        .zip(self.delta(0, t))
                        .for_each(|(g, d)| *g += params.sigma_u * d * xt);
                }
                out.extend(u);
            } else {
                let mut u = vec![0.0; n * n];
                for t in 1..=steps {
                    let d = self.delta(l, t);
                    let h = self.trace.hidden(l - 1, t);
                    for i in 0..n {
                        for j in 0..n {
                            u[i * n + j] += params.sigma_u / root_n * d[i] * h[j];
                        }
                    }
                }
                out.extend(u);
            }
            let mut b = vec![0.0; n];
            for t in 1..=steps {
                b.iter_mut()
                    .zip(self.delta(l, t))
                    .for_each(|(g, d)| *g += params.sigma_b * d);
            }
            out.extend(b);
        }
        for t in 1..=steps {
            let h = self.trace.hidden(depth - 1, t);
            let on = self.mask.is_active(t);
            out.extend(h.iter().map(|v| if on { params.sigma_v / root_n * v } else { 0.0 }));
        }
        out
    }
}

/// Gradient of a network output over both parameter copies. A direction that
/// does not influence the output has no tape and contributes zeros.
#[derive(Clone, Debug)]
pub struct NetworkGradient {
    pub forward: Option<TapeGradient>,
    pub backward: Option<TapeGradient>,
    forward_len: usize,
    backward_len: usize,
}

impl NetworkGradient {
    /// Inner product with a gradient taken at the same weights.
    pub fn inner(&self, other: &NetworkGradient, params: &HyperParams) -> f64 {
        let part = |a: &Option<TapeGradient>, b: &Option<TapeGradient>| match (a, b) {
            (Some(a), Some(b)) => a.inner(b, params),
            _ => 0.0,
        };
        part(&self.forward, &other.forward) + part(&self.backward, &other.backward)
    }

    /// Flat gradient in `NetworkWeights` parameter order.
    pub fn flatten(&self, params: &HyperParams) -> Vec<f64> {
        let mut out = match &self.forward {
            Some(g) => g.flatten(params),
            None => vec![0.0; self.forward_len],
        };
        match &self.backward {
            Some(g) => out.extend(g.flatten(params)),
            None => out.extend(std::iter::repeat_n(0.0, self.backward_len)),
        }
        out
    }
}

/// Backpropagates an already computed network output.
pub fn gradient_of(net: &NetworkWeights, params: &HyperParams, out: &NetworkOutput, mask: &HeadMask) -> NetworkGradient {
    NetworkGradient {
        forward: Some(backprop(&net.forward, params, &out.forward, mask)),
        backward: out
            .backward
            .as_ref()
            .map(|trace| backprop(&net.backward, params, trace, mask)),
        forward_len: net.forward.param_count(),
        backward_len: net.backward.param_count(),
    }
}

/// Gradient of the scalar output of `variant` at `x` with respect to all
/// parameters of both directions.
pub fn gradient(net: &NetworkWeights, params: &HyperParams, x: &[f64], variant: Variant) -> Result<NetworkGradient> {
    let out = forward(net, params, x, variant)?;
    let mask = HeadMask::for_variant(variant, net.forward.steps());
    Ok(gradient_of(net, params, &out, &mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::weights::sample_rnn;

    fn params(depth: usize) -> HyperParams {
        HyperParams::new(std::f64::consts::SQRT_2, 0.5, 0.1, 1.0, depth).unwrap()
    }

    #[test]
    fn zero_input_without_bias_is_silent() {
        let p = HyperParams::new(1.3, 0.5, 0.0, 1.0, 2).unwrap();
        let net = NetworkWeights::sample(16, 2, 4, 3).unwrap();
        for v in Variant::ALL {
            let out = forward(&net, &p, &[0.0; 4], v).unwrap();
            assert_eq!(out.value, 0.0);
            for l in 0..2 {
                for t in 1..=4 {
                    assert!(out.forward.pre(l, t).iter().all(|&g| g == 0.0));
                    assert!(out.forward.hidden(l, t).iter().all(|&h| h == 0.0));
                }
            }
        }
    }

    #[test]
    fn initial_hidden_state_is_zero() {
        let net = NetworkWeights::sample(8, 3, 2, 1).unwrap();
        let out = forward(&net, &params(3), &[0.5, -1.0], Variant::BI_RNN).unwrap();
        for trace in [&out.forward, out.backward.as_ref().unwrap()] {
            for l in 0..3 {
                assert!(trace.hidden(l, 0).iter().all(|&h| h == 0.0));
            }
        }
    }

    #[test]
    fn single_step_single_layer_by_hand() {
        let n = 6;
        let p = params(1);
        let w = sample_rnn(n, 1, 1, 1, 5).unwrap();
        let x = 0.8;
        let trace = run_rnn(&w, &p, &[x]).unwrap();
        let h: Vec<f64> = (0..n)
            .map(|i| (p.sigma_u * w.input_first[i] * x + p.sigma_b * w.bias[0][i]).max(0.0))
            .collect();
        let f = p.sigma_v / (n as f64).sqrt() * dot(&w.heads[0], &h);
        assert!((trace.outputs()[0] - f).abs() < 1e-15);
        assert_eq!(trace.hidden(0, 1), &h[..]);
    }

    #[test]
    fn hidden_is_relu_of_pre_activation() {
        let net = NetworkWeights::sample(10, 2, 3, 8).unwrap();
        let out = forward(&net, &params(2), &[0.3, -0.2, 0.9], Variant::RNN_AVG).unwrap();
        for l in 0..2 {
            for t in 1..=3 {
                let relu: Vec<f64> = out.forward.pre(l, t).iter().map(|v| v.max(0.0)).collect();
                assert_eq!(out.forward.hidden(l, t), &relu[..]);
            }
        }
    }

    #[test]
    fn output_selection_per_variant() {
        let x = [0.3, -0.2, 0.9];
        let net = NetworkWeights::sample(12, 1, 3, 2).unwrap();
        let p = params(1);
        let last = forward(&net, &p, &x, Variant::RNN).unwrap();
        assert_eq!(last.value, last.forward.outputs()[2]);
        let avg = forward(&net, &p, &x, Variant::RNN_AVG).unwrap();
        assert!((avg.value - avg.forward.outputs().iter().sum::<f64>()).abs() < 1e-15);
        let bi = forward(&net, &p, &x, Variant::BI_RNN).unwrap();
        let flipped = run_rnn(&net.backward, &p, &flip(&x)).unwrap();
        assert_eq!(bi.value, last.value + flipped.outputs()[2]);
        let rev = forward(&net, &p, &x, Variant::RNN.flipped()).unwrap();
        assert_eq!(rev.forward.input(), &flip(&x)[..]);
    }

    #[test]
    fn rejects_length_mismatch() {
        let net = NetworkWeights::sample(4, 1, 3, 0).unwrap();
        assert!(matches!(forward(&net, &params(1), &[1.0], Variant::RNN), Err(Error::Shape(_))));
        assert!(matches!(forward(&net, &params(2), &[1.0; 3], Variant::RNN), Err(Error::Shape(_))));
    }

    #[test]
    fn unused_parameters_have_zero_gradient() {
        let steps = 4;
        let n = 6;
        let net = NetworkWeights::sample(n, 2, steps, 11).unwrap();
        let g = gradient(&net, &params(2), &[0.1, 0.7, -0.4, 0.2], Variant::RNN).unwrap();
        let flat = g.flatten(&params(2));
        let split = net.forward.param_count();
        assert!(flat[split..].iter().all(|&v| v == 0.0));
        // heads V(1..T-1) are the last (T-1) n entries before V(T)
        let heads_start = split - steps * n;
        assert!(flat[heads_start..split - n].iter().all(|&v| v == 0.0));
        assert!(flat[split - n..split].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn factored_inner_product_matches_flat_dot() {
        let p = params(2);
        let net = NetworkWeights::sample(7, 2, 3, 21).unwrap();
        let x = [0.6, -0.3, 0.8];
        let y = [-0.1, 0.9, 0.4];
        for v in Variant::ALL {
            let gx = gradient(&net, &p, &x, v).unwrap();
            let gy = gradient(&net, &p, &y, v).unwrap();
            let flat: f64 = dot(&gx.flatten(&p), &gy.flatten(&p));
            let factored = gx.inner(&gy, &p);
            assert!((flat - factored).abs() <= 1e-12 * flat.abs().max(1.0), "{v}: {flat} vs {factored}");
        }
    }

    #[test]
    fn transposed_matvec_matches_explicit_transpose() {
        let n = 300;
        let a: Vec<f64> = (0..n * n).map(|k| ((k * 7919) % 13) as f64 - 6.0).collect();
        let x: Vec<f64> = (0..n).map(|k| (k % 5) as f64 - 2.0).collect();
        let mut at = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                at[j * n + i] = a[i * n + j];
            }
        }
        assert_eq!(matvec_t(&a, &x), matvec(&at, &x));
    }
}
