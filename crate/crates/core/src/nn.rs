//! Dense feed-forward networks trained by backpropagation and Adam.
//!
//! Weights are stored `fan_in × fan_out`, so a layer maps a row batch `X`
//! to `act(X·W + b)`. Everything is `f64`.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::{Distribution, Uniform};
use rand::Rng;

use crate::{Error, Matrix, Result};

/// Elementwise nonlinearity applied after the affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Activation {
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + libm::exp(-x)),
            Activation::Tanh => libm::tanh(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output `u`:
    /// `u(1−u)` for sigmoid, `1−u²` for tanh.
    #[inline]
    pub fn derivative_from_output(self, u: f64) -> f64 {
        match self {
            Activation::Sigmoid => u * (1.0 - u),
            Activation::Tanh => 1.0 - u * u,
            Activation::Identity => 1.0,
        }
    }
}

/// Uniform Xavier (Glorot) initialization on `±√(6/(fan_in+fan_out))`.
pub fn xavier_init(fan_in: usize, fan_out: usize, rng_seed: u64) -> Result<Matrix> {
    let mut rng = crate::rng::stream_rng(rng_seed, 0);
    xavier_init_with(fan_in, fan_out, &mut rng)
}

pub fn xavier_init_with<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Result<Matrix> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::argument("xavier_init: fan_in and fan_out must be positive"));
    }
    let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    let dist = Uniform::new_inclusive(-bound, bound).map_err(|e| Error::argument(e.to_string()))?;
    Ok(Matrix::from_fn(fan_in, fan_out, |_, _| dist.sample(rng)))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DenseLayer {
    weights: Matrix,
    biases: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    /// Xavier weights, zero biases.
    pub fn new<R: Rng + ?Sized>(
        fan_in: usize,
        fan_out: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(DenseLayer {
            weights: xavier_init_with(fan_in, fan_out, rng)?,
            biases: vec![0.0; fan_out],
            activation,
        })
    }

    pub fn from_parts(weights: Matrix, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::argument("DenseLayer: empty weight matrix"));
        }
        if biases.len() != weights.cols() {
            return Err(Error::shape("DenseLayer biases", weights.cols(), biases.len()));
        }
        Ok(DenseLayer {
            weights,
            biases,
            activation,
        })
    }

    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights_mut(&mut self) -> &mut Matrix {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.fan_in() {
            return Err(Error::shape("DenseLayer::forward", self.fan_in(), x.cols()));
        }
        let mut z = x.matmul(&self.weights)?;
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&self.biases) {
                *v = self.activation.apply(*v + b);
            }
        }
        Ok(z)
    }

    /// Forward pass for a single sample.
    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.fan_in() {
            return Err(Error::shape("DenseLayer::forward_one", self.fan_in(), x.len()));
        }
        let mut out = self.biases.clone();
        for (m, &xm) in x.iter().enumerate() {
            for (o, &w) in out.iter_mut().zip(self.weights.row(m)) {
                *o += xm * w;
            }
        }
        out.iter_mut().for_each(|v| *v = self.activation.apply(*v));
        Ok(out)
    }
}

/// Gradients for one layer, shaped like its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

/// Per-layer gradients in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGrads {
    pub layers: Vec<LayerGrads>,
}

impl NetworkGrads {
    pub fn is_zero(&self) -> bool {
        self.layers.iter().all(|g| {
            g.weights.as_slice().iter().all(|&v| v == 0.0) && g.biases.iter().all(|&v| v == 0.0)
        })
    }

    /// Flat views in the same order as [`DenseNetwork::param_segments_mut`].
    pub fn segments(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|g| [g.weights.as_slice(), g.biases.as_slice()])
            .collect()
    }
}

/// Activations recorded by [`DenseNetwork::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Matrix,
    outputs: Vec<Matrix>,
    revision: u64,
}

impl ForwardCache {
    pub fn input(&self) -> &Matrix {
        &self.input
    }

    /// Post-activation output of each layer.
    pub fn outputs(&self) -> &[Matrix] {
        &self.outputs
    }
}

/// A stack of dense layers. The revision counter advances whenever the
/// parameters are changed through [`DenseNetwork::apply_adam`], so caches
/// recorded before an update are detected as stale.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DenseNetwork {
    layers: Vec<DenseLayer>,
    #[cfg_attr(feature = "serde", serde(skip))]
    revision: u64,
}

impl DenseNetwork {
    /// Builds layers `dims[0]→dims[1]→…`, all with the same activation.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::argument("DenseNetwork needs at least two layer dims"));
        }
        let layers = dims
            .windows(2)
            .map(|w| DenseLayer::new(w[0], w[1], activation, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(DenseNetwork { layers, revision: 0 })
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::argument("DenseNetwork needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::shape(
                    "DenseNetwork layer chaining",
                    pair[0].fan_out(),
                    pair[1].fan_in(),
                ));
            }
        }
        Ok(DenseNetwork { layers, revision: 0 })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Mutable access to the layers; marks existing caches stale.
    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        self.revision += 1;
        &mut self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(DenseLayer::fan_out));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.biases.len())
            .sum()
    }

    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if batch.cols() != self.input_dim() {
            return Err(Error::shape("DenseNetwork::forward", self.input_dim(), batch.cols()));
        }
        let mut outputs: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = outputs.last().unwrap_or(batch);
            outputs.push(layer.forward(x)?);
        }
        let output = outputs[outputs.len() - 1].clone();
        Ok((
            output,
            ForwardCache {
                input: batch.clone(),
                outputs,
                revision: self.revision,
            },
        ))
    }

    /// Forward pass without recording a cache.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        if batch.cols() != self.input_dim() {
            return Err(Error::shape("DenseNetwork::predict", self.input_dim(), batch.cols()));
        }
        let mut x = self.layers[0].forward(batch)?;
        for layer in &self.layers[1..] {
            x = layer.forward(&x)?;
        }
        Ok(x)
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut h = self.layers[0].forward_one(x)?;
        for layer in &self.layers[1..] {
            h = layer.forward_one(&h)?;
        }
        Ok(h)
    }

    /// Backpropagates `upstream_grad` (∂loss/∂output) through the cached pass.
    /// Returns parameter gradients and ∂loss/∂input.
    pub fn backward(&self, cache: &ForwardCache, upstream_grad: &Matrix) -> Result<(NetworkGrads, Matrix)> {
        if cache.revision != self.revision || cache.outputs.len() != self.layers.len() {
            return Err(Error::Contract(
                "forward cache does not belong to the current network parameters".into(),
            ));
        }
        for (layer, out) in self.layers.iter().zip(&cache.outputs) {
            if out.cols() != layer.fan_out() || out.rows() != cache.input.rows() {
                return Err(Error::Contract("forward cache shape does not match network".into()));
            }
        }
        let last = &cache.outputs[cache.outputs.len() - 1];
        if upstream_grad.shape() != last.shape() {
            return Err(Error::shape(
                "DenseNetwork::backward upstream",
                alloc::format!("{:?}", last.shape()),
                alloc::format!("{:?}", upstream_grad.shape()),
            ));
        }

        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream_grad.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let out = &cache.outputs[idx];
            for (d, &u) in delta.as_mut_slice().iter_mut().zip(out.as_slice()) {
                *d *= layer.activation.derivative_from_output(u);
            }
            let input = if idx == 0 { &cache.input } else { &cache.outputs[idx - 1] };
            let dw = input.t_matmul(&delta)?;
            let mut db = vec![0.0; layer.fan_out()];
            for row in delta.iter_rows() {
                for (b, &d) in db.iter_mut().zip(row) {
                    *b += d;
                }
            }
            let dx = delta.matmul_t(&layer.weights)?;
            grads.push(LayerGrads {
                weights: dw,
                biases: db,
            });
            delta = dx;
        }
        grads.reverse();
        Ok((NetworkGrads { layers: grads }, delta))
    }

    /// Flat mutable views of all parameters: weights then biases, per layer.
    pub fn param_segments_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
            .collect()
    }

    pub fn apply_adam(&mut self, grads: &NetworkGrads, state: &mut AdamState) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(Error::shape("apply_adam layers", self.layers.len(), grads.layers.len()));
        }
        let g = grads.segments();
        let mut p = self.param_segments_mut();
        state.step(&mut p, &g)?;
        self.revision += 1;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.biases.iter().all(|b| b.is_finite()))
    }
}

impl PartialEq for DenseNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Mean over batch rows of `‖x − x_rec‖²`.
pub fn reconstruction_loss(x: &Matrix, x_rec: &Matrix) -> Result<f64> {
    if x.shape() != x_rec.shape() {
        return Err(Error::shape(
            "reconstruction_loss",
            alloc::format!("{:?}", x.shape()),
            alloc::format!("{:?}", x_rec.shape()),
        ));
    }
    if x.rows() == 0 {
        return Err(Error::argument("reconstruction_loss: empty batch"));
    }
    let sum: f64 = x
        .as_slice()
        .iter()
        .zip(x_rec.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / x.rows() as f64)
}

/// ∂ reconstruction_loss / ∂ x_rec.
pub fn reconstruction_loss_grad(x: &Matrix, x_rec: &Matrix) -> Result<Matrix> {
    if x.shape() != x_rec.shape() {
        return Err(Error::shape(
            "reconstruction_loss_grad",
            alloc::format!("{:?}", x.shape()),
            alloc::format!("{:?}", x_rec.shape()),
        ));
    }
    let scale = 2.0 / x.rows() as f64;
    let data = x
        .as_slice()
        .iter()
        .zip(x_rec.as_slice())
        .map(|(a, b)| scale * (b - a))
        .collect();
    Matrix::from_vec(x.rows(), x.cols(), data)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments for a fixed set of parameters, laid out flat.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    config: AdamConfig,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
}

impl AdamState {
    pub fn new(num_params: usize, config: AdamConfig) -> Result<Self> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(config.learning_rate) || !positive(config.epsilon) {
            return Err(Error::argument("Adam: learning rate and epsilon must be positive"));
        }
        if !(0.0..1.0).contains(&config.beta1) || !(0.0..1.0).contains(&config.beta2) {
            return Err(Error::argument("Adam: betas must lie in [0, 1)"));
        }
        Ok(AdamState {
            config,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step_count: 0,
        })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    /// One bias-corrected Adam update over parameter segments paired with
    /// their gradients. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape("AdamState::step segments", params.len(), grads.len()));
        }
        let mut total = 0;
        for (p, g) in params.iter().zip(grads) {
            if p.len() != g.len() {
                return Err(Error::shape("AdamState::step segment", p.len(), g.len()));
            }
            total += p.len();
        }
        if total != self.first_moment.len() {
            return Err(Error::shape("AdamState::step parameter count", self.first_moment.len(), total));
        }
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFiniteGradient {
                step: self.step_count + 1,
            });
        }

        self.step_count += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step_count as i32;
        let bias1 = 1.0 - libm::pow(beta1, t as f64);
        let bias2 = 1.0 - libm::pow(beta2, t as f64);

        let mut offset = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            let m = &mut self.first_moment[offset..offset + p.len()];
            let v = &mut self.second_moment[offset..offset + p.len()];
            for (((pi, &gi), mi), vi) in p.iter_mut().zip(g.iter()).zip(m).zip(v) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / bias1;
                let v_hat = *vi / bias2;
                *pi -= learning_rate * m_hat / (libm::sqrt(v_hat) + epsilon);
            }
            offset += p.len();
        }
        Ok(())
    }
}
