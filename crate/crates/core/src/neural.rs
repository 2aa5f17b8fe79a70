//! Dense multilayer perceptrons with exact reverse-mode gradients and Adam.
//!
//! Hidden layers use LeakyReLU with slope [`LEAKY_SLOPE`]; the output layer
//! is affine. Batched passes take row-major `(batch, features)` matrices.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};

pub const LEAKY_SLOPE: f64 = 0.01;

/// Added to the logits of invalid actions before a softmax.
pub const MASK_PENALTY: f64 = -1e9;

#[inline]
fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

#[inline]
fn leaky_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// One affine layer, `y = x W + b` with `W` stored `(inputs, outputs)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { weight: Array2::zeros((inputs, outputs)), bias: Array1::zeros(outputs) }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Activations recorded by a forward pass, consumed by the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

/// Gradients shaped like the layers of an [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// Builds a network with layer widths `sizes` (input first, output last),
    /// initialized uniformly in `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(invalid("an MLP needs at least an input and an output size"));
        }
        if sizes[1..].contains(&0) {
            return Err(invalid("layer widths after the input must be positive"));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0].max(1) as f64).sqrt();
                let mut layer = Dense::zeros(w[0], w[1]);
                layer.weight.mapv_inplace(|_| rng.random_range(-bound..=bound));
                layer.bias.mapv_inplace(|_| rng.random_range(-bound..=bound));
                layer
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("an MLP needs at least one layer"));
        }
        for l in &layers {
            check_dim(l.outputs(), l.bias.len())?;
        }
        for w in layers.windows(2) {
            check_dim(w[0].outputs(), w[1].inputs())?;
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    /// Layer widths, input first.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(Dense::outputs)).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input).map_err(|e| invalid(e.to_string()))?;
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_dim(self.input_dim(), x.ncols())?;
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            h = h.dot(&layer.weight) + &layer.bias;
            if i < last {
                h.mapv_inplace(leaky);
            }
        }
        Ok(h)
    }

    /// Forward pass that keeps what [`Mlp::backward_batch`] needs.
    pub fn forward_cached(&self, x: Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        check_dim(self.input_dim(), x.ncols())?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = h.dot(&layer.weight) + &layer.bias;
            inputs.push(h);
            if i < last {
                h = z.mapv(leaky);
                pre.push(z);
            } else {
                h = z;
            }
        }
        Ok((h, ForwardCache { inputs, pre }))
    }

    /// Gradients of `sum(upstream * output)` with respect to every parameter
    /// and, when asked, the input batch.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
        want_input_grad: bool,
    ) -> Result<(MlpGrads, Option<Array2<f64>>)> {
        check_dim(self.output_dim(), upstream.ncols())?;
        check_dim(cache.inputs[0].nrows(), upstream.nrows())?;
        let n = self.layers.len();
        let mut grads: Vec<Dense> = Vec::with_capacity(n);
        let mut g = upstream.to_owned();
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            let weight = cache.inputs[i].t().dot(&g).as_standard_layout().into_owned();
            let bias = g.sum_axis(Axis(0));
            grads.push(Dense { weight, bias });
            if i > 0 || want_input_grad {
                let mut down = g.dot(&layer.weight.t());
                if i > 0 {
                    down.zip_mut_with(&cache.pre[i - 1], |d, &z| *d *= leaky_grad(z));
                }
                g = down;
            }
        }
        grads.reverse();
        let input_grad = want_input_grad.then_some(g);
        Ok((MlpGrads { layers: grads }, input_grad))
    }

    /// Single-example gradients of `<upstream, forward(input)>`.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec())
            .map_err(|e| invalid(e.to_string()))?;
        let (_, cache) = self.forward_cached(x)?;
        let up = ArrayView2::from_shape((1, upstream.len()), upstream)
            .map_err(|e| invalid(e.to_string()))?;
        let (grads, dx) = self.backward_batch(&cache, up, true)?;
        Ok((grads, dx.map(|a| a.into_raw_vec_and_offset().0).unwrap_or_default()))
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        check_dim(self.num_params(), params.len())?;
        let mut it = params.iter();
        for l in &mut self.layers {
            for w in l.weight.iter_mut() {
                *w = *it.next().unwrap();
            }
            for b in l.bias.iter_mut() {
                *b = *it.next().unwrap();
            }
        }
        Ok(())
    }

    pub fn to_tensors(&self, prefix: &str) -> Vec<NamedTensor> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            out.push(NamedTensor {
                name: format!("{prefix}.{i}.weight"),
                shape: vec![l.inputs(), l.outputs()],
                data: l.weight.iter().copied().collect(),
            });
            out.push(NamedTensor {
                name: format!("{prefix}.{i}.bias"),
                shape: vec![l.outputs()],
                data: l.bias.to_vec(),
            });
        }
        out
    }

    /// Rebuilds a network from the tensors named `{prefix}.{i}.weight|bias`.
    pub fn from_tensors(prefix: &str, tensors: &[NamedTensor]) -> Result<Self> {
        let find = |name: String| tensors.iter().find(|t| t.name == name);
        let mut layers = Vec::new();
        while let Some(w) = find(format!("{prefix}.{}.weight", layers.len())) {
            let b = find(format!("{prefix}.{}.bias", layers.len()))
                .ok_or_else(|| invalid(format!("missing bias for layer {} of `{prefix}`", layers.len())))?;
            if w.shape.len() != 2 || b.shape.len() != 1 {
                return Err(invalid(format!("bad tensor shapes in `{prefix}`")));
            }
            let weight = Array2::from_shape_vec((w.shape[0], w.shape[1]), w.data.clone())
                .map_err(|e| invalid(e.to_string()))?;
            check_dim(b.shape[0], b.data.len())?;
            layers.push(Dense { weight, bias: Array1::from(b.data.clone()) });
        }
        Self::from_layers(layers)
    }
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self { layers: net.layers.iter().map(|l| Dense::zeros(l.inputs(), l.outputs())).collect() }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn add_assign(&mut self, other: &MlpGrads) -> Result<()> {
        check_dim(self.layers.len(), other.layers.len())?;
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weight *= factor;
            l.bias *= factor;
        }
    }
}

/// Bias-corrected Adam with per-tensor moment buffers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, first: Vec::new(), second: Vec::new() }
    }

    /// Applies one update to `(param, grad)` tensor pairs. A non-finite
    /// gradient leaves both parameters and state untouched.
    pub fn step(&mut self, tensors: &mut [(&mut [f64], &[f64])]) -> Result<()> {
        for (p, g) in tensors.iter() {
            check_dim(p.len(), g.len())?;
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("gradient".into()));
            }
        }
        if self.first.is_empty() {
            self.first = tensors.iter().map(|(p, _)| vec![0.0; p.len()]).collect();
            self.second = self.first.clone();
        }
        check_dim(self.first.len(), tensors.len())?;
        for ((p, _), m) in tensors.iter().zip(&self.first) {
            check_dim(m.len(), p.len())?;
        }
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for (((p, g), m), v) in tensors.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// One Adam update of every parameter of `net`.
pub fn adam_step(net: &mut Mlp, grads: &MlpGrads, state: &mut AdamState) -> Result<()> {
    check_dim(net.layers.len(), grads.layers.len())?;
    let mut tensors: Vec<(&mut [f64], &[f64])> = Vec::with_capacity(2 * net.layers.len());
    for (l, g) in net.layers.iter_mut().zip(&grads.layers) {
        let gw = g.weight.as_slice().ok_or_else(|| invalid("non-contiguous gradient"))?;
        let gb = g.bias.as_slice().ok_or_else(|| invalid("non-contiguous gradient"))?;
        tensors.push((l.weight.as_slice_mut().ok_or_else(|| invalid("non-contiguous weight"))?, gw));
        tensors.push((l.bias.as_slice_mut().ok_or_else(|| invalid("non-contiguous bias"))?, gb));
    }
    state.step(&mut tensors)
}

/// Numerically stable softmax restricted to the entries where `mask` is set.
pub fn softmax_logits_to_distribution(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    let log_probs = log_softmax_masked(logits, mask)?;
    Ok(log_probs
        .iter()
        .zip(mask)
        .map(|(lp, &m)| if m { lp.exp() } else { 0.0 })
        .collect())
}

/// Log-probabilities of a masked softmax; masked entries get `-inf`.
pub fn log_softmax_masked(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    check_dim(logits.len(), mask.len())?;
    if !mask.iter().any(|&m| m) {
        return Err(invalid("every action is masked"));
    }
    let shifted: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { l } else { l + MASK_PENALTY })
        .collect();
    let max = shifted
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(l, _)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let lse = max
        + shifted
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(l, _)| (l - max).exp())
            .sum::<f64>()
            .ln();
    Ok(shifted
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { l - lse } else { f64::NEG_INFINITY })
        .collect())
}

/// A named parameter tensor in a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}
