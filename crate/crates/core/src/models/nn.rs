use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

use super::ClassWeights;

/// Layer description; weights live in the owning [`Network`]'s flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Valid 1-D convolution, stride 1.
    Conv1d {
        out_channels: usize,
        kernel: usize,
    },
    Relu,
    /// Non-overlapping max pooling; a trailing partial window is dropped.
    MaxPool {
        size: usize,
    },
    Dense {
        out: usize,
    },
}

/// Activation shape: channels x length (dense outputs are `out x 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Shape {
    channels: usize,
    len: usize,
}

impl Shape {
    fn size(self) -> usize {
        self.channels * self.len
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    spec: LayerSpec,
    input: Shape,
    output: Shape,
    /// Offset of this layer's weights (then biases) in the parameter vector.
    offset: usize,
    n_params: usize,
}

/// Feed-forward network ending in a single logit.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub input_dims: usize,
    pub specs: Vec<LayerSpec>,
    pub params: Vec<f64>,
    layers: Vec<Layer>,
}

impl Network {
    /// Lays out `specs` over a 1-channel input of `input_dims`; the last layer must produce one value.
    pub fn new(input_dims: usize, specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let layers = plan(input_dims, specs)?;
        let total = layers.last().map_or(0, |l| l.offset + l.n_params);
        let mut net = Self {
            input_dims,
            specs: specs.to_vec(),
            params: vec![0.0; total],
            layers,
        };
        net.init(seed);
        Ok(net)
    }

    pub fn from_params(input_dims: usize, specs: &[LayerSpec], params: Vec<f64>) -> Result<Self> {
        let layers = plan(input_dims, specs)?;
        let total = layers.last().map_or(0, |l| l.offset + l.n_params);
        if params.len() != total {
            return Err(Error::Dimension {
                expected: total,
                actual: params.len(),
            });
        }
        Ok(Self {
            input_dims,
            specs: specs.to_vec(),
            params,
            layers,
        })
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// He-uniform weights, zero biases.
    fn init(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in &self.layers {
            let (fan_in, n_w) = match l.spec {
                LayerSpec::Conv1d {
                    out_channels,
                    kernel,
                } => (
                    l.input.channels * kernel,
                    out_channels * l.input.channels * kernel,
                ),
                LayerSpec::Dense { out } => (l.input.size(), out * l.input.size()),
                _ => continue,
            };
            let limit = (6.0 / fan_in as f64).sqrt();
            for p in &mut self.params[l.offset..l.offset + n_w] {
                *p = rng.random_range(-limit..limit);
            }
        }
    }

    /// Output logit for one input.
    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let mut act = x.to_vec();
        for (k, l) in self.layers.iter().enumerate() {
            act = forward_layer(l, &self.params, &act).0;
            finite(k, &act)?;
        }
        Ok(act[0])
    }

    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(x)?))
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dims {
            return Err(Error::Dimension {
                expected: self.input_dims,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Weighted BCE of one sample and its gradient added into `grad` (scaled by `scale`).
    fn sample_backprop(
        &self,
        x: &[f64],
        target: f64,
        weight: f64,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        self.check(x)?;
        let mut acts = vec![x.to_vec()];
        let mut masks = Vec::with_capacity(self.layers.len());
        for (k, l) in self.layers.iter().enumerate() {
            let (out, mask) = forward_layer(l, &self.params, acts.last().map_or(&[][..], |a| a));
            finite(k, &out)?;
            acts.push(out);
            masks.push(mask);
        }
        let z = acts[self.layers.len()][0];
        let loss = weight * (softplus(z) - target * z);
        let mut delta = vec![weight * (sigmoid(z) - target) * scale];
        for (k, l) in self.layers.iter().enumerate().rev() {
            delta = backward_layer(l, &self.params, &acts[k], &masks[k], &delta, grad);
        }
        Ok(loss)
    }

    /// Mean weighted BCE over `idx` and its gradient. Per-sample gradients are
    /// summed in index order, so the result does not depend on thread count.
    pub fn loss_and_grad(
        &self,
        x: &[Vec<f64>],
        labels: &[Label],
        weights: ClassWeights,
        idx: &[usize],
    ) -> Result<(f64, Vec<f64>)> {
        let scale = 1.0 / idx.len().max(1) as f64;
        const CHUNK: usize = 8;
        let parts: Vec<(f64, Vec<f64>)> = idx
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut g = vec![0.0; self.params.len()];
                let mut loss = 0.0;
                for &i in chunk {
                    loss += self.sample_backprop(
                        &x[i],
                        labels[i].target(),
                        weights.of(labels[i]),
                        scale,
                        &mut g,
                    )?;
                }
                Ok((loss, g))
            })
            .collect::<Result<_>>()?;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for (l, g) in parts {
            loss += l;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        Ok((loss * scale, grad))
    }

    /// Mean weighted BCE without gradients.
    pub fn loss(
        &self,
        x: &[Vec<f64>],
        labels: &[Label],
        weights: ClassWeights,
        idx: &[usize],
    ) -> Result<f64> {
        let total: Result<Vec<f64>> = idx
            .par_iter()
            .map(|&i| {
                let z = self.logit(&x[i])?;
                Ok(weights.of(labels[i]) * (softplus(z) - labels[i].target() * z))
            })
            .collect();
        Ok(total?.iter().sum::<f64>() / idx.len().max(1) as f64)
    }
}

fn finite(layer: usize, act: &[f64]) -> Result<()> {
    if act.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "non-finite activation at layer {layer}"
        )))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn plan(input_dims: usize, specs: &[LayerSpec]) -> Result<Vec<Layer>> {
    if input_dims == 0 {
        return Err(Error::invalid(
            "network input must have at least one dimension",
        ));
    }
    let mut shape = Shape {
        channels: 1,
        len: input_dims,
    };
    let mut offset = 0;
    let mut layers = Vec::with_capacity(specs.len());
    for &spec in specs {
        let (output, n_params) = match spec {
            LayerSpec::Conv1d {
                out_channels,
                kernel,
            } => {
                if kernel == 0 || out_channels == 0 || kernel > shape.len {
                    return Err(Error::invalid(format!(
                        "conv kernel {kernel} does not fit input of length {}",
                        shape.len
                    )));
                }
                (
                    Shape {
                        channels: out_channels,
                        len: shape.len - kernel + 1,
                    },
                    out_channels * shape.channels * kernel + out_channels,
                )
            }
            LayerSpec::Relu => (shape, 0),
            LayerSpec::MaxPool { size } => {
                if size == 0 || size > shape.len {
                    return Err(Error::invalid(format!(
                        "pool size {size} does not fit length {}",
                        shape.len
                    )));
                }
                (
                    Shape {
                        channels: shape.channels,
                        len: shape.len / size,
                    },
                    0,
                )
            }
            LayerSpec::Dense { out } => {
                if out == 0 {
                    return Err(Error::invalid("dense layer needs at least one output"));
                }
                (
                    Shape {
                        channels: out,
                        len: 1,
                    },
                    out * shape.size() + out,
                )
            }
        };
        layers.push(Layer {
            spec,
            input: shape,
            output,
            offset,
            n_params,
        });
        offset += n_params;
        shape = output;
    }
    if shape.size() != 1 {
        return Err(Error::invalid(format!(
            "network must end in a single output, got {}",
            shape.size()
        )));
    }
    Ok(layers)
}

/// Returns the layer output and, for ReLU/pooling, the routing needed by backprop.
fn forward_layer(l: &Layer, params: &[f64], x: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let (ci, li) = (l.input.channels, l.input.len);
    match l.spec {
        LayerSpec::Conv1d {
            out_channels,
            kernel,
        } => {
            let w = &params[l.offset..];
            let b = &params[l.offset + out_channels * ci * kernel..];
            let lo = l.output.len;
            let mut out = vec![0.0; out_channels * lo];
            for o in 0..out_channels {
                for t in 0..lo {
                    let mut acc = b[o];
                    for c in 0..ci {
                        let wk = &w[(o * ci + c) * kernel..(o * ci + c + 1) * kernel];
                        let xs = &x[c * li + t..c * li + t + kernel];
                        acc += wk.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>();
                    }
                    out[o * lo + t] = acc;
                }
            }
            (out, Vec::new())
        }
        LayerSpec::Relu => {
            let mask = x.iter().map(|&v| usize::from(v > 0.0)).collect();
            (x.iter().map(|&v| v.max(0.0)).collect(), mask)
        }
        LayerSpec::MaxPool { size } => {
            let lo = l.output.len;
            let mut out = vec![0.0; ci * lo];
            let mut arg = vec![0; ci * lo];
            for c in 0..ci {
                for t in 0..lo {
                    let start = c * li + t * size;
                    let mut best = start;
                    for k in start + 1..start + size {
                        if x[k] > x[best] {
                            best = k;
                        }
                    }
                    out[c * lo + t] = x[best];
                    arg[c * lo + t] = best;
                }
            }
            (out, arg)
        }
        LayerSpec::Dense { out } => {
            let n_in = l.input.size();
            let w = &params[l.offset..l.offset + out * n_in];
            let b = &params[l.offset + out * n_in..l.offset + l.n_params];
            let y = (0..out)
                .map(|o| {
                    b[o] + w[o * n_in..(o + 1) * n_in]
                        .iter()
                        .zip(x)
                        .map(|(a, c)| a * c)
                        .sum::<f64>()
                })
                .collect();
            (y, Vec::new())
        }
    }
}

/// Accumulates parameter gradients into `grad` and returns the gradient w.r.t. the layer input.
fn backward_layer(
    l: &Layer,
    params: &[f64],
    x: &[f64],
    route: &[usize],
    dy: &[f64],
    grad: &mut [f64],
) -> Vec<f64> {
    let (ci, li) = (l.input.channels, l.input.len);
    match l.spec {
        LayerSpec::Conv1d {
            out_channels,
            kernel,
        } => {
            let lo = l.output.len;
            let n_w = out_channels * ci * kernel;
            let mut dx = vec![0.0; x.len()];
            for o in 0..out_channels {
                let dyo = &dy[o * lo..(o + 1) * lo];
                grad[l.offset + n_w + o] += dyo.iter().sum::<f64>();
                for c in 0..ci {
                    let base = (o * ci + c) * kernel;
                    for k in 0..kernel {
                        let xs = &x[c * li + k..c * li + k + lo];
                        grad[l.offset + base + k] +=
                            dyo.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>();
                        let wk = params[l.offset + base + k];
                        for (t, d) in dyo.iter().enumerate() {
                            dx[c * li + t + k] += wk * d;
                        }
                    }
                }
            }
            dx
        }
        LayerSpec::Relu => dy
            .iter()
            .zip(route)
            .map(|(d, &m)| if m == 1 { *d } else { 0.0 })
            .collect(),
        LayerSpec::MaxPool { .. } => {
            let mut dx = vec![0.0; x.len()];
            for (d, &src) in dy.iter().zip(route) {
                dx[src] += d;
            }
            dx
        }
        LayerSpec::Dense { out } => {
            let n_in = l.input.size();
            let mut dx = vec![0.0; n_in];
            for o in 0..out {
                let d = dy[o];
                grad[l.offset + out * n_in + o] += d;
                let row = l.offset + o * n_in;
                for i in 0..n_in {
                    grad[row + i] += d * x[i];
                    dx[i] += params[row + i] * d;
                }
            }
            dx
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam optimizer state for one parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        Self {
            config,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    }
}
