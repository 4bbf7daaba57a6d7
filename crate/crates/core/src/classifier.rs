//! Fully-connected feedforward classifier trained by backpropagation.
//!
//! Each neuron computes `z = sum_k x_k w_k + b`; hidden layers apply ReLU and
//! the output layer applies softmax over the classes. The reference layout is
//! `[d_in, 12, 8, 6, k]`. Training minimizes categorical cross-entropy with
//! mini-batch SGD; initialization and shuffling come from one seeded ChaCha
//! stream so a `(data, config)` pair always yields the same weights.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ModelVariant, Normalizer};
use crate::stack_io;

pub const HIDDEN_LAYERS: [usize; 3] = [12, 8, 6];
pub const PROB_FLOOR: f64 = 1e-12;
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    /// Pre-activations `W x + b`.
    pub fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

pub fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect()
}

/// Softmax with the maximum logit subtracted first.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `probs` against `label`, flooring the probability at 1e-12.
pub fn loss(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or_else(|| {
        Error::Validation(format!("label {label} out of range for {} classes", probs.len()))
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Index of the largest probability; the smallest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Parameter gradients, one entry per layer, same layout as [`Layer`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(net: &Network) -> Self {
        Gradients {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    fn add(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.biases)
            .flat_map(|v| v.iter())
            .map(|g| g * g)
            .sum()
    }
}

impl Network {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Validation("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return Err(Error::Validation(format!("layer {i} has inconsistent shapes")));
            }
            if i > 0 && layers[i - 1].outputs != l.inputs {
                return Err(Error::Validation(format!(
                    "layer {i} expects {} inputs, previous layer gives {}",
                    l.inputs,
                    layers[i - 1].outputs
                )));
            }
            if l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("layer {i} has non-finite parameters")));
            }
        }
        if layers.last().unwrap().outputs < 2 {
            return Err(Error::Validation("need at least 2 output classes".into()));
        }
        Ok(Network { layers })
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Validation("layer_sizes needs input and output".into()));
        }
        Network::from_layers(
            layer_sizes
                .windows(2)
                .map(|w| Layer::zeros(w[0], w[1]))
                .collect(),
        )
    }

    /// He-uniform weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn he_uniform<R: Rng>(layer_sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Network::zeros(layer_sizes)?;
        for l in &mut net.layers {
            let limit = (6.0 / l.inputs as f64).sqrt();
            for w in &mut l.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs)
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Validation(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Activations of every layer: `acts[0] = x`, `acts[i+1]` is the output
    /// of layer `i` (softmax for the last one). `pre[i]` are its logits.
    fn trace(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut acts = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let z = l.affine(acts.last().unwrap());
            let a = if i == last { softmax(&z) } else { relu(&z) };
            pre.push(z);
            acts.push(a);
        }
        (pre, acts)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.trace(x).1.pop().unwrap())
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    /// Exact gradients of `loss(forward(x), label)`.
    pub fn backward(&self, x: &[f64], label: usize) -> Result<Gradients> {
        self.check_input(x)?;
        if label >= self.num_classes() {
            return Err(Error::Validation(format!(
                "label {label} out of range for {} classes",
                self.num_classes()
            )));
        }
        let (pre, acts) = self.trace(x);
        let mut grads = Gradients::zeros_like(self);
        // softmax + cross-entropy: dL/dz = p - onehot
        let mut delta = acts.last().unwrap().clone();
        delta[label] -= 1.0;
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            let input = &acts[i];
            for (o, &d) in delta.iter().enumerate() {
                grads.biases[i][o] = d;
                let row = &mut grads.weights[i][o * l.inputs..(o + 1) * l.inputs];
                for (g, &a) in row.iter_mut().zip(input) {
                    *g = d * a;
                }
            }
            if i == 0 {
                break;
            }
            let mut prev = vec![0.0; l.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += w * d;
                }
            }
            // ReLU'(0) = 0
            for (p, &z) in prev.iter_mut().zip(&pre[i - 1]) {
                if z <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
        Ok(grads)
    }

    /// Plain gradient step with optional L2 decay on weights.
    pub fn apply_step(&mut self, grads: &Gradients, learning_rate: f64, l2: f64) {
        for ((l, gw), gb) in self.layers.iter_mut().zip(&grads.weights).zip(&grads.biases) {
            for (w, g) in l.weights.iter_mut().zip(gw) {
                *w -= learning_rate * (g + l2 * *w);
            }
            for (b, g) in l.biases.iter_mut().zip(gb) {
                *b -= learning_rate * g;
            }
        }
    }

    /// Mean gradient over a batch of samples.
    pub fn batch_gradient<'a, I>(&self, batch: I) -> Result<Gradients>
    where
        I: IntoIterator<Item = (&'a [f64], usize)>,
    {
        let mut total = Gradients::zeros_like(self);
        let mut n = 0usize;
        for (x, y) in batch {
            total.add(&self.backward(x, y)?);
            n += 1;
        }
        if n > 0 {
            let scale = 1.0 / n as f64;
            for v in total.weights.iter_mut().chain(total.biases.iter_mut()) {
                v.iter_mut().for_each(|g| *g *= scale);
            }
        }
        Ok(total)
    }

    pub fn mean_loss(&self, data: &[(Vec<f64>, usize)]) -> Result<f64> {
        let mut total = 0.0;
        for (x, y) in data {
            total += loss(&self.forward(x)?, *y)?;
        }
        Ok(total / data.len().max(1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub init_scheme: InitScheme,
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    #[default]
    HeUniform,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 500,
            batch_size: 32,
            seed: 0,
            init_scheme: InitScheme::HeUniform,
            l2: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config("train.learning_rate", "must be > 0"));
        }
        if self.epochs < 1 {
            return Err(Error::config("train.epochs", "must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::config("train.batch_size", "must be >= 1"));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::config("train.l2", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    pub final_loss: f64,
}

/// Mini-batch SGD on a network with arbitrary hidden layout.
pub fn train_network(
    data: &[(Vec<f64>, usize)],
    layer_sizes: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.batch_size > data.len() {
        return Err(Error::config(
            "train.batch_size",
            format!("{} exceeds training set size {}", cfg.batch_size, data.len()),
        ));
    }
    let d_in = layer_sizes[0];
    let k = *layer_sizes.last().unwrap();
    if let Some((x, _)) = data.iter().find(|(x, _)| x.len() != d_in) {
        return Err(Error::Validation(format!(
            "sample has {} features, expected {d_in}",
            x.len()
        )));
    }
    if let Some((_, y)) = data.iter().find(|(_, y)| *y >= k) {
        return Err(Error::Validation(format!("label {y} out of range for {k} classes")));
    }
    let mut present = vec![false; k];
    data.iter().for_each(|(_, y)| present[*y] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::Validation("training data must contain at least 2 classes".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = match cfg.init_scheme {
        InitScheme::HeUniform => Network::he_uniform(layer_sizes, &mut rng)?,
    };
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let grads = net.batch_gradient(chunk.iter().map(|&i| (data[i].0.as_slice(), data[i].1)))?;
            net.apply_step(&grads, cfg.learning_rate, cfg.l2);
        }
    }
    let final_loss = net.mean_loss(data)?;
    Ok(TrainOutcome {
        network: net,
        final_loss,
    })
}

/// Reference layout `[d_in, 12, 8, 6, classes]`.
pub fn reference_layout(input_dim: usize, classes: usize) -> Vec<usize> {
    let mut sizes = vec![input_dim];
    sizes.extend(HIDDEN_LAYERS);
    sizes.push(classes);
    sizes
}

/// Trains the reference architecture for one feature variant.
pub fn train(
    data: &[(Vec<f64>, usize)],
    variant: ModelVariant,
    bands: usize,
    classes: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let d_in = variant.input_dim(bands);
    if let Some((x, _)) = data.iter().find(|(x, _)| x.len() != d_in) {
        return Err(Error::Validation(format!(
            "{variant} expects {d_in} features, got {}",
            x.len()
        )));
    }
    train_network(data, &reference_layout(d_in, classes), cfg)
}

/// A trained network bundled with everything needed to score raw features.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub variant: ModelVariant,
    pub network: Network,
    pub normalizer: Normalizer,
    pub feature_order: Vec<String>,
    pub class_names: Vec<String>,
}

impl Model {
    /// Class probabilities for an unnormalized assembled vector.
    pub fn probabilities(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.normalizer.dim() {
            return Err(Error::Validation(format!(
                "model expects {} features, got {}",
                self.normalizer.dim(),
                raw.len()
            )));
        }
        self.network.forward(&self.normalizer.apply(raw))
    }

    pub fn predict(&self, raw: &[f64]) -> Result<usize> {
        Ok(argmax(&self.probabilities(raw)?))
    }

    pub fn to_file(&self, config_hash: Option<String>) -> ModelFile {
        ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            variant: self.variant,
            layer_sizes: self.network.layer_sizes(),
            weights: self.network.layers.iter().map(|l| l.weights.clone()).collect(),
            biases: self.network.layers.iter().map(|l| l.biases.clone()).collect(),
            normalizer: self.normalizer.clone(),
            feature_order: self.feature_order.clone(),
            class_names: self.class_names.clone(),
            config_hash,
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        if file.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "model schema_version {} is not supported (expected {MODEL_SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        let sizes = &file.layer_sizes;
        if sizes.len() < 2 || file.weights.len() != sizes.len() - 1 || file.biases.len() != sizes.len() - 1 {
            return Err(Error::Validation("model layer arrays disagree with layer_sizes".into()));
        }
        let layers = sizes
            .windows(2)
            .zip(file.weights)
            .zip(file.biases)
            .map(|((w, weights), biases)| Layer {
                inputs: w[0],
                outputs: w[1],
                weights,
                biases,
            })
            .collect();
        let network = Network::from_layers(layers)?;
        if file.normalizer.dim() != network.input_dim() || file.feature_order.len() != network.input_dim() {
            return Err(Error::Validation("normalizer or feature order width mismatch".into()));
        }
        if file.class_names.len() != network.num_classes() {
            return Err(Error::Validation("class_names length differs from output layer".into()));
        }
        Ok(Model {
            variant: file.variant,
            network,
            normalizer: file.normalizer,
            feature_order: file.feature_order,
            class_names: file.class_names,
        })
    }

    pub fn save(&self, path: &Path, config_hash: Option<String>) -> Result<()> {
        stack_io::write_json(path, &self.to_file(config_hash))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Model::from_file(stack_io::read_json(path)?)
    }
}

/// On-disk model schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub variant: ModelVariant,
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub normalizer: Normalizer,
    pub feature_order: Vec<String>,
    pub class_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn single_affine_layer() {
        let l = Layer {
            inputs: 2,
            outputs: 1,
            weights: vec![1.0, 1.0],
            biases: vec![0.0],
        };
        assert_eq!(l.affine(&[2.0, 3.0]), vec![5.0]);
    }

    #[test]
    fn zero_network_is_uniform() {
        let net = Network::zeros(&reference_layout(5, 6)).unwrap();
        let p = net.forward(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn softmax_large_logit() {
        let p = softmax(&[1000.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(p[1] < 1e-300);
    }

    #[test]
    fn relu_cases() {
        assert_eq!(relu(&[-3.0, 0.0, 2.0]), vec![0.0, 0.0, 2.0]);
        assert_eq!(relu(&[-1.0, -5.0]), vec![0.0, 0.0]);
        assert_eq!(relu(&[0.5, 3.0]), vec![0.5, 3.0]);
    }

    #[test]
    fn loss_cases() {
        assert_eq!(loss(&[0.0, 1.0], 1).unwrap(), 0.0);
        let uni = vec![1.0 / 6.0; 6];
        assert!((loss(&uni, 3).unwrap() - 6f64.ln()).abs() < 1e-12);
        assert!((loss(&[1.0, 0.0], 1).unwrap() - 27.631021115928547).abs() < 1e-9);
        assert!(loss(&[0.5, 0.5], 2).is_err());
    }

    #[test]
    fn fused_output_gradient() {
        let net = Network::zeros(&reference_layout(5, 6)).unwrap();
        let g = net.backward(&[0.3; 5], 2).unwrap();
        let last = g.biases.last().unwrap();
        for (i, &v) in last.iter().enumerate() {
            let want = 1.0 / 6.0 - if i == 2 { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-15);
        }
        // everything upstream of a zero layer is dead
        assert!(g.weights[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dead_relu_paths_have_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Network::he_uniform(&[3, 4, 3], &mut rng).unwrap();
        // hidden unit 1 always negative
        let l0 = &mut net.layers_mut()[0];
        l0.weights[3..6].copy_from_slice(&[0.0, 0.0, 0.0]);
        l0.biases[1] = -1.0;
        let g = net.backward(&[0.5, -0.2, 1.0], 0).unwrap();
        assert!(g.weights[0][3..6].iter().all(|&v| v == 0.0));
        assert_eq!(g.biases[0][1], 0.0);
        for o in 0..3 {
            assert_eq!(g.weights[1][o * 4 + 1], 0.0);
        }
    }

    #[test]
    fn argmax_ties_and_order() {
        assert_eq!(argmax(&[0.1, 0.5, 0.1, 0.1, 0.1, 0.1]), 1);
        assert_eq!(argmax(&[0.1, 0.1, 0.3, 0.1, 0.3, 0.1]), 2);
    }

    fn blobs(n: usize, seed: u64) -> Vec<(Vec<f64>, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        (0..n)
            .map(|i| {
                let c = i % 2;
                let center = if c == 0 { -2.0 } else { 2.0 };
                (
                    vec![center + noise.sample(&mut rng), center + noise.sample(&mut rng)],
                    c,
                )
            })
            .collect()
    }

    #[test]
    fn separable_blobs_train_to_high_accuracy() {
        let data = blobs(200, 1);
        let cfg = TrainConfig {
            epochs: 200,
            seed: 5,
            ..TrainConfig::default()
        };
        let out = train_network(&data, &reference_layout(2, 2), &cfg).unwrap();
        let correct = data
            .iter()
            .filter(|(x, y)| out.network.predict(x).unwrap() == *y)
            .count();
        assert!(correct as f64 / data.len() as f64 >= 0.99, "{correct}/200");
        assert!(out.final_loss < 0.1);
    }

    #[test]
    fn training_is_deterministic() {
        let data = blobs(64, 2);
        let cfg = TrainConfig {
            epochs: 20,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = train_network(&data, &reference_layout(2, 2), &cfg).unwrap();
        let b = train_network(&data, &reference_layout(2, 2), &cfg).unwrap();
        assert_eq!(a.network, b.network);
        assert_eq!(a.final_loss.to_bits(), b.final_loss.to_bits());
    }

    #[test]
    fn config_validation() {
        let data = blobs(10, 3);
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(train_network(&data, &[2, 2], &bad).is_err());
        let big = TrainConfig {
            batch_size: 11,
            ..TrainConfig::default()
        };
        assert!(train_network(&data, &[2, 2], &big).is_err());
        let one_class: Vec<_> = data.iter().map(|(x, _)| (x.clone(), 0)).collect();
        let cfg = TrainConfig {
            batch_size: 4,
            ..TrainConfig::default()
        };
        assert!(train_network(&one_class, &[2, 2], &cfg).is_err());
        assert!(train(&data, ModelVariant::Spectral, 6, 2, &cfg).is_err());
    }

    #[test]
    fn model_rejects_schema_mismatch() {
        let net = Network::zeros(&[2, 2]).unwrap();
        let model = Model {
            variant: ModelVariant::Morphological,
            network: net,
            normalizer: Normalizer::identity(2),
            feature_order: vec!["a".into(), "b".into()],
            class_names: vec!["x".into(), "y".into()],
        };
        let mut file = model.to_file(None);
        assert_eq!(Model::from_file(file.clone()).unwrap(), model);
        file.schema_version = 99;
        assert!(Model::from_file(file).is_err());
    }
}
