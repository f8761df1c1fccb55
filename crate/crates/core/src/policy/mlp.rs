//! Dense feed-forward networks with tanh hidden layers and a linear output.
//!
//! Parameters are stored flat, layer by layer: the weight matrix row-major
//! (`out x in`) followed by the bias vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Input width followed by each layer's output width.
    pub widths: Vec<usize>,
}

impl MlpSpec {
    pub fn new(widths: &[usize]) -> Self {
        assert!(widths.len() >= 2, "an MLP needs at least one layer");
        Self {
            widths: widths.to_vec(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Activations kept from a forward pass: `acts[0]` is the input, `acts[l + 1]`
/// the output of layer `l` (post-activation for hidden layers).
#[derive(Debug, Clone)]
pub struct MlpCache {
    acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

fn check_shapes(spec: &MlpSpec, params: &[f64], input: &[f64]) -> Result<()> {
    if params.len() != spec.param_count() {
        return Err(Error::Contract(format!(
            "MLP expects {} parameters, got {}",
            spec.param_count(),
            params.len()
        )));
    }
    if input.len() != spec.input_dim() {
        return Err(Error::Contract(format!(
            "MLP expects input of width {}, got {}",
            spec.input_dim(),
            input.len()
        )));
    }
    Ok(())
}

pub fn forward_cached(spec: &MlpSpec, params: &[f64], input: &[f64]) -> MlpCache {
    let mut acts = Vec::with_capacity(spec.widths.len());
    acts.push(input.to_vec());
    let mut off = 0;
    let last = spec.num_layers() - 1;
    for (l, w) in spec.widths.windows(2).enumerate() {
        let (n_in, n_out) = (w[0], w[1]);
        let weights = &params[off..off + n_in * n_out];
        let bias = &params[off + n_in * n_out..off + n_in * n_out + n_out];
        off += n_in * n_out + n_out;
        let x = acts.last().unwrap();
        let mut y = bias.to_vec();
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &weights[o * n_in..(o + 1) * n_in];
            *yo += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        if l != last {
            for v in &mut y {
                *v = v.tanh();
            }
        }
        acts.push(y);
    }
    MlpCache { acts }
}

/// Accumulates parameter gradients into `grad` and returns the input gradient.
pub fn backward_accumulate(
    spec: &MlpSpec,
    params: &[f64],
    cache: &MlpCache,
    upstream: &[f64],
    grad: &mut [f64],
) -> Vec<f64> {
    let offsets: Vec<usize> = spec
        .widths
        .windows(2)
        .scan(0, |off, w| {
            let start = *off;
            *off += w[0] * w[1] + w[1];
            Some(start)
        })
        .collect();
    let last = spec.num_layers() - 1;
    let mut delta = upstream.to_vec();
    for l in (0..spec.num_layers()).rev() {
        let (n_in, n_out) = (spec.widths[l], spec.widths[l + 1]);
        if l != last {
            // d tanh = 1 - y^2
            for (d, y) in delta.iter_mut().zip(&cache.acts[l + 1]) {
                *d *= 1.0 - y * y;
            }
        }
        let off = offsets[l];
        let x = &cache.acts[l];
        let weights = &params[off..off + n_in * n_out];
        {
            let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    for (g, xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
                gb[o] += d;
            }
        }
        let mut prev = vec![0.0; n_in];
        for o in 0..n_out {
            let d = delta[o];
            if d != 0.0 {
                for (p, w) in prev.iter_mut().zip(&weights[o * n_in..(o + 1) * n_in]) {
                    *p += d * w;
                }
            }
        }
        delta = prev;
    }
    delta
}

pub fn mlp_forward(spec: &MlpSpec, params: &[f64], input: &[f64]) -> Result<Vec<f64>> {
    check_shapes(spec, params, input)?;
    Ok(forward_cached(spec, params, input).acts.pop().unwrap())
}

/// Exact gradients of `upstream . mlp(params, input)` with respect to the
/// parameters and the input.
pub fn mlp_backward(
    spec: &MlpSpec,
    params: &[f64],
    input: &[f64],
    upstream: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_shapes(spec, params, input)?;
    if upstream.len() != spec.output_dim() {
        return Err(Error::Contract(format!(
            "upstream gradient has width {}, expected {}",
            upstream.len(),
            spec.output_dim()
        )));
    }
    let cache = forward_cached(spec, params, input);
    let mut grad = vec![0.0; params.len()];
    let input_grad = backward_accumulate(spec, params, &cache, upstream, &mut grad);
    Ok((grad, input_grad))
}

/// Glorot-uniform weights, zero biases; the final layer is scaled by `out_gain`.
pub fn init_params(spec: &MlpSpec, out_gain: f64, rng: &mut impl rand::Rng) -> Vec<f64> {
    let mut params = Vec::with_capacity(spec.param_count());
    let last = spec.num_layers() - 1;
    for (l, w) in spec.widths.windows(2).enumerate() {
        let (n_in, n_out) = (w[0], w[1]);
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        let gain = if l == last { out_gain } else { 1.0 };
        for _ in 0..n_in * n_out {
            params.push(gain * rng.gen_range(-limit..limit));
        }
        params.extend(std::iter::repeat_n(0.0, n_out));
    }
    params
}
