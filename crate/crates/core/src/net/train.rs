//! Minibatch gradient descent on softmax cross-entropy.

use rand::seq::SliceRandom;

use super::{ActivationKind, PwlNetwork};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(
                "learning_rate must be finite and non-negative".into(),
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "epochs and batch_size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Parameter gradients laid out like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(net: &PwlNetwork) -> Self {
        Self {
            weights: net
                .layers()
                .iter()
                .map(|l| Matrix::zeros(l.fan_out(), l.fan_in()))
                .collect(),
            biases: net.layers().iter().map(|l| vec![0.0; l.fan_out()]).collect(),
        }
    }
}

fn softmax_xent(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (logits[label] - max);
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

/// Mean cross-entropy over `indices` of `data` and its gradient.
pub fn loss_and_gradients(
    net: &PwlNetwork,
    data: &LabeledDataset,
    indices: &[usize],
) -> Result<(f64, Gradients)> {
    let mut grads = Gradients::zeros_like(net);
    let mut total = 0.0;
    let classes = net.output_dim();
    for &i in indices {
        let (x, label) = (data.point(i), data.label(i));
        if label >= classes {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let trace = net.forward_traced(x)?;
        let (loss, mut delta) = softmax_xent(trace.output(), label);
        total += loss;
        for l in (0..net.layer_count()).rev() {
            let layer = &net.layers()[l];
            if layer.activation() == ActivationKind::Relu {
                for (d, &z) in delta.iter_mut().zip(trace.pre(l).expect("traced")) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input = trace.input_to(l).expect("traced");
            let gw = &mut grads.weights[l];
            for (r, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    for (g, &a) in gw.row_mut(r).iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
                grads.biases[l][r] += d;
            }
            if l > 0 {
                delta = layer.weights().matvec_t(&delta);
            }
        }
    }
    let n = indices.len().max(1) as f64;
    for g in &mut grads.weights {
        g.as_mut_slice().iter_mut().for_each(|v| *v /= n);
    }
    for g in &mut grads.biases {
        g.iter_mut().for_each(|v| *v /= n);
    }
    Ok((total / n, grads))
}

/// Trains a copy of `net`; returns it with the mean loss of every epoch.
///
/// Epoch `e` shuffles sample order with a sub-seed of `(cfg.seed, e)`, so the
/// whole run is a pure function of its arguments.
pub fn train(
    net: &PwlNetwork,
    data: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(PwlNetwork, Vec<f64>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    if data.num_classes() > net.output_dim() {
        return Err(Error::LabelOutOfRange {
            label: data.num_classes() - 1,
            classes: net.output_dim(),
        });
    }
    if data.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: data.dim(),
        });
    }
    let mut net = net.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut rng = seed::rng(seed::sub_seed(cfg.seed, epoch as u64));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grads) = loss_and_gradients(&net, data, batch)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            epoch_loss += loss * batch.len() as f64;
            for (layer, (gw, gb)) in net
                .layers_mut()
                .iter_mut()
                .zip(grads.weights.iter().zip(&grads.biases))
            {
                let (w, b) = layer.params_mut();
                for (p, g) in w.as_mut_slice().iter_mut().zip(gw.as_slice()) {
                    *p -= cfg.learning_rate * g;
                }
                for (p, g) in b.iter_mut().zip(gb) {
                    *p -= cfg.learning_rate * g;
                }
            }
        }
        let mean = epoch_loss / data.len() as f64;
        if !mean.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.push(mean);
    }
    Ok((net, history))
}

pub fn accuracy(net: &PwlNetwork, data: &LabeledDataset) -> Result<f64> {
    let mut correct = 0usize;
    for i in 0..data.len() {
        let logits = net.forward(data.point(i))?;
        if super::argmax(&logits) == data.label(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_blobs;

    fn mean_loss(net: &PwlNetwork, data: &LabeledDataset) -> f64 {
        (0..data.len())
            .map(|i| softmax_xent(&net.forward(data.point(i)).unwrap(), data.label(i)).0)
            .sum::<f64>()
            / data.len() as f64
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let data = make_blobs(2, 6, 2, 0.8, 3).unwrap();
        let mut net = PwlNetwork::init_random(&[2, 3, 2], 17).unwrap();
        // Nonzero biases so the check covers bias gradients away from kinks.
        for (l, layer) in net.layers_mut().iter_mut().enumerate() {
            let (_, b) = layer.params_mut();
            for (i, v) in b.iter_mut().enumerate() {
                *v = 0.1 * (i as f64 + 1.0) - 0.05 * l as f64;
            }
        }
        assert!(net.parameter_count() <= 50);
        let all: Vec<usize> = (0..data.len()).collect();
        let (_, grads) = loss_and_gradients(&net, &data, &all).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for l in 0..net.layer_count() {
            let n_w = net.layers()[l].weights().as_slice().len();
            let n_b = net.layers()[l].bias().len();
            for p in 0..n_w + n_b {
                let perturb = |net: &mut PwlNetwork, delta: f64| {
                    let (w, b) = net.layers_mut()[l].params_mut();
                    if p < n_w {
                        w.as_mut_slice()[p] += delta;
                    } else {
                        b[p - n_w] += delta;
                    }
                };
                let mut plus = net.clone();
                perturb(&mut plus, h);
                let mut minus = net.clone();
                perturb(&mut minus, -h);
                let numeric = (mean_loss(&plus, &data) - mean_loss(&minus, &data)) / (2.0 * h);
                let analytic = if p < n_w {
                    grads.weights[l].as_slice()[p]
                } else {
                    grads.biases[l][p - n_w]
                };
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn zero_learning_rate_keeps_loss_constant() {
        let data = make_blobs(3, 10, 2, 0.5, 1).unwrap();
        let net = PwlNetwork::init_random(&[2, 8, 3], 1).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 5,
            batch_size: 4,
            seed: 0,
        };
        let (trained, hist) = train(&net, &data, &cfg).unwrap();
        assert_eq!(trained, net);
        assert!(hist.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12));
    }

    #[test]
    fn blobs_are_fit() {
        let data = make_blobs(3, 100, 2, 0.6, 5).unwrap();
        let net = PwlNetwork::init_random(&[2, 16, 16, 3], 5).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 16,
            seed: 5,
        };
        let (trained, hist) = train(&net, &data, &cfg).unwrap();
        assert_eq!(hist.len(), 200);
        assert!(accuracy(&trained, &data).unwrap() >= 0.95);
        let (_, again) = train(&net, &data, &cfg).unwrap();
        assert_eq!(hist, again);
    }

    #[test]
    fn labels_beyond_outputs_rejected() {
        let data = make_blobs(3, 4, 2, 0.5, 1).unwrap();
        let net = PwlNetwork::init_random(&[2, 4, 2], 1).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.1,
            epochs: 1,
            batch_size: 4,
            seed: 0,
        };
        assert!(matches!(
            train(&net, &data, &cfg),
            Err(Error::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let data = make_blobs(2, 20, 2, 0.5, 1).unwrap();
        let net = PwlNetwork::init_random(&[2, 8, 8, 2], 1).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e300,
            epochs: 3,
            batch_size: 40,
            seed: 0,
        };
        assert!(matches!(
            train(&net, &data, &cfg),
            Err(Error::TrainingDiverged { .. })
        ));
    }
}
