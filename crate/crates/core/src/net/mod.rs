//! Small piecewise-linear networks: evaluation, tracing, mid-network injection,
//! initialization, training and the on-disk format.

mod io;
mod train;

pub use io::{load_network, network_from_json, network_to_json, save_network};
pub use train::{accuracy, loss_and_gradients, train, Gradients, TrainConfig};

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{check_dim, Matrix};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Relu,
    Identity,
}

impl ActivationKind {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            ActivationKind::Relu => {
                if v > 0.0 {
                    v
                } else {
                    0.0
                }
            }
            ActivationKind::Identity => v,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(ActivationKind::Relu),
            "identity" => Some(ActivationKind::Identity),
            _ => None,
        }
    }
}

/// A neuron is active iff its pre-activation is strictly positive.
#[inline]
pub fn is_active(pre_activation: f64) -> bool {
    pre_activation > 0.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Matrix,
    bias: Vec<f64>,
    activation: ActivationKind,
}

impl Layer {
    /// `weights` is `fan_out × fan_in`.
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: ActivationKind) -> Result<Self> {
        Self::validated(weights, bias, activation, 0)
    }

    fn validated(
        weights: Matrix,
        bias: Vec<f64>,
        activation: ActivationKind,
        index: usize,
    ) -> Result<Self> {
        if weights.rows() != bias.len() {
            return Err(Error::Validation {
                layer: index,
                message: format!(
                    "bias length {} does not match weight row count {}",
                    bias.len(),
                    weights.rows()
                ),
            });
        }
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::Validation {
                layer: index,
                message: "empty weight matrix".into(),
            });
        }
        if !weights.is_finite() || bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::Validation {
                layer: index,
                message: "non-finite parameter".into(),
            });
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }

    pub fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.weights.matvec(x);
        for (zi, bi) in z.iter_mut().zip(&self.bias) {
            *zi += bi;
        }
        z
    }

    pub fn activate(&self, pre: &[f64]) -> Vec<f64> {
        pre.iter().map(|&v| self.activation.apply(v)).collect()
    }

    pub(crate) fn params_mut(&mut self) -> (&mut Matrix, &mut Vec<f64>) {
        (&mut self.weights, &mut self.bias)
    }
}

/// Per-layer pre- and post-activations for one input, starting at `first_layer`.
///
/// A full trace from [`PwlNetwork::forward_traced`] has `first_layer == 0`;
/// [`PwlNetwork::forward_from_layer`] produces partial traces.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub first_layer: usize,
    /// Activation kind of each traced layer.
    pub activations: Vec<ActivationKind>,
    pub input: Vec<f64>,
    pub pre_activation: Vec<Vec<f64>>,
    pub post_activation: Vec<Vec<f64>>,
}

impl ActivationTrace {
    /// Pre-activation of absolute layer `layer`, if covered by the trace.
    pub fn pre(&self, layer: usize) -> Option<&[f64]> {
        layer
            .checked_sub(self.first_layer)
            .and_then(|i| self.pre_activation.get(i))
            .map(Vec::as_slice)
    }

    pub fn post(&self, layer: usize) -> Option<&[f64]> {
        layer
            .checked_sub(self.first_layer)
            .and_then(|i| self.post_activation.get(i))
            .map(Vec::as_slice)
    }

    /// The vector fed into absolute layer `layer`.
    pub fn input_to(&self, layer: usize) -> Option<&[f64]> {
        if layer == self.first_layer {
            Some(&self.input)
        } else {
            layer.checked_sub(1).and_then(|l| self.post(l))
        }
    }

    pub fn output(&self) -> &[f64] {
        self.post_activation.last().map_or(&self.input, Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PwlNetwork {
    layers: Vec<Layer>,
}

impl PwlNetwork {
    /// Validates that consecutive layer dimensions chain.
    ///
    /// Classifier use (training, sweeps) additionally expects an `Identity`
    /// final layer, see [`PwlNetwork::is_classifier`]; analysis operations
    /// accept any activation layout.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network has no layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::Validation {
                    layer: i + 1,
                    message: format!(
                        "fan_in {} does not match previous fan_out {}",
                        pair[1].fan_in(),
                        pair[0].fan_out()
                    ),
                });
            }
        }
        Ok(Self { layers })
    }

    pub(crate) fn from_raw_layers(raw: Vec<(Matrix, Vec<f64>, ActivationKind)>) -> Result<Self> {
        let layers = raw
            .into_iter()
            .enumerate()
            .map(|(i, (w, b, a))| Layer::validated(w, b, a, i))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    /// Random initialization: hidden layers `Relu`, output `Identity`,
    /// weights uniform in `±sqrt(3/fan_in)` (variance `1/fan_in`), biases zero.
    pub fn init_random(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument(
                "need at least an input and an output size".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument("layer sizes must be positive".into()));
        }
        let mut rng = seed::rng(seed);
        let n_layers = layer_sizes.len() - 1;
        let layers = layer_sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (3.0 / fan_in as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect();
                let activation = if i + 1 == n_layers {
                    ActivationKind::Identity
                } else {
                    ActivationKind::Relu
                };
                Layer::new(
                    Matrix::from_vec(fan_out, fan_in, data).expect("shape"),
                    vec![0.0; fan_out],
                    activation,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, index: usize) -> Result<&Layer> {
        self.layers.get(index).ok_or(Error::LayerOutOfRange {
            index,
            layers: self.layers.len(),
        })
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    /// Input dimension of layer `index` (the space its polytopes live in).
    pub fn dim_into(&self, index: usize) -> Result<usize> {
        Ok(self.layer(index)?.fan_in())
    }

    pub fn is_classifier(&self) -> bool {
        self.layers[self.layers.len() - 1].activation() == ActivationKind::Identity
    }

    pub fn relu_layer_indices(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.activation() == ActivationKind::Relu)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.fan_in() * l.fan_out() + l.fan_out())
            .sum()
    }

    /// Replaces every activation with `Identity`, giving the purely linear
    /// network with the same weights.
    pub fn linearized(&self) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                activation: ActivationKind::Identity,
                ..l.clone()
            })
            .collect();
        Self { layers }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), x.len())?;
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = layer.activate(&layer.pre_activation(&h));
        }
        Ok(h)
    }

    pub fn forward_traced(&self, x: &[f64]) -> Result<ActivationTrace> {
        let (_, trace) = self.forward_from_layer(0, x)?;
        Ok(trace)
    }

    /// Evaluates layers `layer_index..` on the hidden vector `h`.
    pub fn forward_from_layer(
        &self,
        layer_index: usize,
        h: &[f64],
    ) -> Result<(Vec<f64>, ActivationTrace)> {
        check_dim(self.dim_into(layer_index)?, h.len())?;
        let remaining = self.layers.len() - layer_index;
        let mut pre_activation = Vec::with_capacity(remaining);
        let mut post_activation: Vec<Vec<f64>> = Vec::with_capacity(remaining);
        for layer in &self.layers[layer_index..] {
            let input = post_activation.last().map_or(h, Vec::as_slice);
            let pre = layer.pre_activation(input);
            post_activation.push(layer.activate(&pre));
            pre_activation.push(pre);
        }
        let logits = post_activation.last().cloned().unwrap_or_default();
        Ok((
            logits,
            ActivationTrace {
                first_layer: layer_index,
                activations: self.layers[layer_index..]
                    .iter()
                    .map(Layer::activation)
                    .collect(),
                input: h.to_vec(),
                pre_activation,
                post_activation,
            },
        ))
    }

    /// Hidden vector fed into layer `layer_index` for input `x`.
    pub fn activation_into(&self, layer_index: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.layer(layer_index)?;
        check_dim(self.input_dim(), x.len())?;
        let mut h = x.to_vec();
        for layer in &self.layers[..layer_index] {
            h = layer.activate(&layer.pre_activation(&h));
        }
        Ok(h)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(w: f64, b: f64, act: ActivationKind) -> PwlNetwork {
        let layer = Layer::new(Matrix::from_vec(1, 1, vec![w]).unwrap(), vec![b], act).unwrap();
        PwlNetwork::new(vec![layer]).unwrap()
    }

    /// Naive triple-loop evaluation kept independent of `Matrix::matvec`.
    fn naive_trace(net: &PwlNetwork, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut h = x.to_vec();
        let (mut pres, mut posts) = (vec![], vec![]);
        for layer in net.layers() {
            let w = layer.weights();
            let mut pre = vec![0.0; w.rows()];
            for (r, p) in pre.iter_mut().enumerate() {
                let mut acc = layer.bias()[r];
                for (c, hc) in h.iter().enumerate() {
                    acc += w.get(r, c) * hc;
                }
                *p = acc;
            }
            let post: Vec<f64> = pre
                .iter()
                .map(|&v| match layer.activation() {
                    ActivationKind::Relu => v.max(0.0),
                    ActivationKind::Identity => v,
                })
                .collect();
            h = post.clone();
            pres.push(pre);
            posts.push(post);
        }
        (pres, posts)
    }

    #[test]
    fn relu_clamps_negative() {
        let net = single(1.0, 0.0, ActivationKind::Relu);
        assert_eq!(net.forward(&[-2.0]).unwrap(), vec![0.0]);
        let net = single(2.0, 1.0, ActivationKind::Relu);
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn forward_matches_naive_oracle() {
        let net = PwlNetwork::init_random(&[2, 4, 3], 11).unwrap();
        let mut rng = seed::rng(5);
        for _ in 0..50 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let got = net.forward(&x).unwrap();
            let (_, posts) = naive_trace(&net, &x);
            for (a, b) in got.iter().zip(posts.last().unwrap()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn traced_values_match_naive_oracle() {
        let net = PwlNetwork::init_random(&[3, 5, 4], 2).unwrap();
        let x = [0.3, -1.2, 0.8];
        let trace = net.forward_traced(&x).unwrap();
        let (pres, posts) = naive_trace(&net, &x);
        for l in 0..2 {
            for (a, b) in trace.pre(l).unwrap().iter().zip(&pres[l]) {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in trace.post(l).unwrap().iter().zip(&posts[l]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert_eq!(trace.output(), net.forward(&x).unwrap().as_slice());
    }

    #[test]
    fn trace_of_identity_relu_layer() {
        let layer = Layer::new(
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            vec![0.0, 0.0],
            ActivationKind::Relu,
        )
        .unwrap();
        let net = PwlNetwork::new(vec![layer]).unwrap();
        let t = net.forward_traced(&[3.0, -1.0]).unwrap();
        assert_eq!(t.pre_activation, vec![vec![3.0, -1.0]]);
        assert_eq!(t.post_activation, vec![vec![3.0, 0.0]]);
        let t = single(1.0, 0.0, ActivationKind::Relu).forward_traced(&[-2.0]).unwrap();
        assert_eq!(t.pre_activation, vec![vec![-2.0]]);
        assert_eq!(t.post_activation, vec![vec![0.0]]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let net = PwlNetwork::init_random(&[2, 4, 3], 1).unwrap();
        assert!(matches!(
            net.forward(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            net.forward_from_layer(5, &[1.0]),
            Err(Error::LayerOutOfRange { .. })
        ));
        assert!(net.forward_from_layer(1, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn split_evaluation_is_consistent() {
        let net = PwlNetwork::init_random(&[2, 6, 5, 3], 4).unwrap();
        let x = [0.7, -0.4];
        let full = net.forward(&x).unwrap();
        assert_eq!(net.forward_from_layer(0, &x).unwrap().0, full);
        let trace = net.forward_traced(&x).unwrap();
        for l in 1..net.layer_count() {
            let (logits, _) = net.forward_from_layer(l, trace.post(l - 1).unwrap()).unwrap();
            assert_eq!(logits, full);
        }
    }

    #[test]
    fn init_is_deterministic_with_expected_shapes() {
        let a = PwlNetwork::init_random(&[2, 4, 3], 9).unwrap();
        let b = PwlNetwork::init_random(&[2, 4, 3], 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.layers()[0].weights().rows(), 4);
        assert_eq!(a.layers()[0].weights().cols(), 2);
        assert_eq!(a.layers()[1].weights().rows(), 3);
        assert_eq!(a.layers()[1].weights().cols(), 4);
        assert!(a.is_classifier());
        assert!(a.layers().iter().all(|l| l.bias().iter().all(|&b| b == 0.0)));
        assert!(PwlNetwork::init_random(&[2], 0).is_err());
        assert!(PwlNetwork::init_random(&[2, 0, 3], 0).is_err());
    }

    #[test]
    fn init_variance_is_inverse_fan_in() {
        let net = PwlNetwork::init_random(&[256, 40], 3).unwrap();
        let w = net.layers()[0].weights().as_slice();
        assert!(w.len() >= 10_000);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
        let target = 1.0 / 256.0;
        assert!((var - target).abs() / target < 0.2, "variance {var}");
    }

    #[test]
    fn mismatched_layers_rejected() {
        let a = Layer::new(Matrix::zeros(3, 2), vec![0.0; 3], ActivationKind::Relu).unwrap();
        let b = Layer::new(Matrix::zeros(1, 4), vec![0.0], ActivationKind::Identity).unwrap();
        assert!(matches!(
            PwlNetwork::new(vec![a, b]),
            Err(Error::Validation { layer: 1, .. })
        ));
        assert!(Layer::new(Matrix::zeros(2, 2), vec![0.0], ActivationKind::Relu).is_err());
    }

    #[test]
    fn zero_bias_relu_network_is_positively_homogeneous() {
        let mut net = PwlNetwork::init_random(&[3, 8, 8, 2], 21).unwrap();
        for layer in net.layers_mut() {
            layer.activation = ActivationKind::Relu;
        }
        let x = [0.4, -1.1, 2.0];
        let base = net.forward(&x).unwrap();
        for alpha in [0.0, 0.5, 1.0, 3.0] {
            let scaled: Vec<f64> = x.iter().map(|v| v * alpha).collect();
            let out = net.forward(&scaled).unwrap();
            for (o, b) in out.iter().zip(&base) {
                assert!((o - alpha * b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn argmax_ties_take_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }
}
