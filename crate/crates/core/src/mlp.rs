//! Single-sensor predictor: a small fully connected network trained from scratch.
//!
//! ReLU hidden layers, softmax output, inverted dropout on hidden activations
//! during training, L2 on weights (not biases), mean categorical cross-entropy,
//! Adam, and early stopping on validation loss with best-parameter restore.
//! All randomness (initialisation, shuffling, dropout masks) is drawn from one
//! ChaCha generator seeded from the hyperparameters, in that order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distribution::ClassDistribution;
use crate::metrics::macro_f1;
use crate::windowing::AffectClass;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlpError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("label {0} outside the class range")]
    InvalidLabel(usize),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpHyper {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub l2: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for MlpHyper {
    fn default() -> Self {
        Self {
            hidden: vec![64, 32],
            learning_rate: 1e-3,
            l2: 1e-4,
            dropout: 0.2,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            seed: 42,
        }
    }
}

impl MlpHyper {
    pub fn validate(&self) -> Result<(), MlpError> {
        let bad = |m: &str| Err(MlpError::InvalidHyper(m.to_string()));
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return bad("l2 must be nonnegative");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive");
        }
        Ok(())
    }
}

/// Fully connected layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }
}

/// Layer stack without any input scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Dense>,
}

/// Per-layer gradients in the same layout as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }
}

impl Network {
    /// `dims = [input, hidden..., output]`, all parameters zero.
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "need input and output widths");
        Self {
            layers: dims.windows(2).map(|d| Dense::zeros(d[0], d[1])).collect(),
        }
    }

    /// Weights drawn from `N(0, 2 / fan_in)`, biases zero.
    pub fn he_init<R: Rng>(dims: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(dims);
        for layer in &mut net.layers {
            let normal = Normal::new(0.0, (2.0 / layer.inputs as f64).sqrt()).expect("valid std");
            for w in &mut layer.weights {
                *w = normal.sample(rng);
            }
        }
        net
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    /// Output layer pre-activations, dropout off.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            a = layer.apply(&a);
            if l < last {
                a.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        a
    }

    pub fn predict(&self, x: &[f64]) -> ClassDistribution {
        ClassDistribution::softmax(&self.logits(x))
    }

    /// `(l2 / 2) * sum W^2`.
    pub fn penalty(&self, l2: f64) -> f64 {
        0.5 * l2
            * self
                .layers
                .iter()
                .flat_map(|l| &l.weights)
                .map(|w| w * w)
                .sum::<f64>()
    }

    pub fn weight_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| &l.weights)
            .map(|w| w * w)
            .sum::<f64>()
            .sqrt()
    }

    /// Mean cross-entropy without the penalty.
    pub fn cross_entropy(&self, xs: &[Vec<f64>], ys: &[usize]) -> f64 {
        let total: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, &y)| -self.predict(x).probs()[y].max(1e-300).ln())
            .sum();
        total / xs.len() as f64
    }

    /// Mean cross-entropy plus L2 penalty, and its gradient.
    ///
    /// `masks[i][l]` scales hidden layer `l` of sample `i` (inverted dropout);
    /// `None` disables dropout.
    pub fn loss_and_gradients(
        &self,
        xs: &[Vec<f64>],
        ys: &[usize],
        l2: f64,
        masks: Option<&[Vec<Vec<f64>>]>,
    ) -> (f64, Gradients) {
        let mut grads = Gradients {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: self.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        };
        let last = self.layers.len() - 1;
        let mut loss = 0.0;

        for (i, (x, &y)) in xs.iter().zip(ys).enumerate() {
            // activations[l] feeds layer l; pre[l] is layer l's output before ReLU.
            let mut activations = vec![x.clone()];
            let mut pre = Vec::with_capacity(self.layers.len());
            for (l, layer) in self.layers.iter().enumerate() {
                let z = layer.apply(&activations[l]);
                if l < last {
                    let mut a: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
                    if let Some(m) = masks {
                        a.iter_mut().zip(&m[i][l]).for_each(|(v, s)| *v *= s);
                    }
                    activations.push(a);
                }
                pre.push(z);
            }
            let p = ClassDistribution::softmax(&pre[last]);
            loss -= p.probs()[y].max(1e-300).ln();

            let mut delta: Vec<f64> = p.probs().to_vec();
            delta[y] -= 1.0;
            for l in (0..=last).rev() {
                let layer = &self.layers[l];
                let input = &activations[l];
                for (o, d) in delta.iter().enumerate() {
                    grads.bias[l][o] += d;
                    let row = &mut grads.weights[l][o * layer.inputs..(o + 1) * layer.inputs];
                    row.iter_mut().zip(input).for_each(|(g, a)| *g += d * a);
                }
                if l == 0 {
                    break;
                }
                let mut back = vec![0.0; layer.inputs];
                for (o, d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    back.iter_mut().zip(row).for_each(|(b, w)| *b += w * d);
                }
                let below = l - 1;
                for (j, b) in back.iter_mut().enumerate() {
                    if pre[below][j] <= 0.0 {
                        *b = 0.0;
                    } else if let Some(m) = masks {
                        *b *= m[i][below][j];
                    }
                }
                delta = back;
            }
        }

        let n = xs.len() as f64;
        for (l, layer) in self.layers.iter().enumerate() {
            grads.weights[l]
                .iter_mut()
                .zip(&layer.weights)
                .for_each(|(g, w)| *g = *g / n + l2 * w);
            grads.bias[l].iter_mut().for_each(|g| *g /= n);
        }
        (loss / n + self.penalty(l2), grads)
    }

    /// Parameters in gradient order: per layer, weights then biases.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_flat(&mut self, params: &[f64]) {
        let mut it = params.iter();
        for layer in &mut self.layers {
            for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *v = *it.next().expect("parameter count mismatch");
            }
        }
        assert!(it.next().is_none(), "parameter count mismatch");
    }

    fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

/// Per-feature z-scoring fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Constant columns get unit scale.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows[0].len();
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..dim).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale = (0..dim)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    /// Mean mini-batch objective per epoch (cross-entropy + penalty, dropout on).
    pub train_loss: Vec<f64>,
    /// Validation cross-entropy per epoch.
    pub val_loss: Vec<f64>,
}

/// Feature rows with zero-based class labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>) -> Self {
        assert_eq!(features.len(), labels.len(), "one label per row");
        Self { features, labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.features.first().map(Vec::len)
    }

    fn check(&self, dim: usize, classes: usize) -> Result<(), MlpError> {
        if let Some(row) = self.features.iter().find(|r| r.len() != dim) {
            return Err(MlpError::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
        if let Some(&y) = self.labels.iter().find(|&&y| y >= classes) {
            return Err(MlpError::InvalidLabel(y));
        }
        Ok(())
    }
}

/// A trained predictor: input scaling, network, and its validation macro-F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub network: Network,
    pub standardizer: Standardizer,
    pub hyper: MlpHyper,
    pub f1: f64,
    pub summary: TrainingSummary,
}

impl MlpModel {
    pub fn input_dim(&self) -> usize {
        self.network.input_dim()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<ClassDistribution, MlpError> {
        if x.len() != self.input_dim() {
            return Err(MlpError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(self.network.predict(&self.standardizer.transform(x)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, MlpError> {
        let model: Self = serde_json::from_str(s).map_err(|e| MlpError::InvalidCheckpoint(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), MlpError> {
        let bad = |m: String| Err(MlpError::InvalidCheckpoint(m));
        let layers = self.network.layers();
        if layers.is_empty() {
            return bad("no layers".into());
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return bad(format!("layer {i} has inconsistent shapes"));
            }
            if i > 0 && layers[i - 1].outputs != l.inputs {
                return bad(format!("layer {i} input width does not match"));
            }
        }
        if self.network.output_dim() != AffectClass::COUNT {
            return bad(format!("output width {} != {}", self.network.output_dim(), AffectClass::COUNT));
        }
        let dim = self.input_dim();
        if self.standardizer.mean.len() != dim || self.standardizer.scale.len() != dim {
            return bad("normalisation statistics do not match input width".into());
        }
        if !self.network.is_finite() {
            return bad("non-finite parameters".into());
        }
        Ok(())
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(len: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPSILON);
        }
    }
}

fn dropout_masks<R: Rng>(hidden: &[usize], rate: f64, rng: &mut R) -> Vec<Vec<f64>> {
    let keep = 1.0 - rate;
    hidden
        .iter()
        .map(|&w| {
            (0..w)
                .map(|_| if rng.random::<f64>() < rate { 0.0 } else { 1.0 / keep })
                .collect()
        })
        .collect()
}

/// Trains on `train`, early-stops on `val`, and scores macro-F1 on `val`.
pub fn train(train: &Dataset, val: &Dataset, hyper: &MlpHyper) -> Result<(MlpModel, f64), MlpError> {
    hyper.validate()?;
    let classes = AffectClass::COUNT;
    let dim = train
        .dim()
        .ok_or_else(|| MlpError::InsufficientData("empty training set".into()))?;
    if val.is_empty() {
        return Err(MlpError::InsufficientData("empty validation set".into()));
    }
    train.check(dim, classes)?;
    val.check(dim, classes)?;
    let mut present = [false; AffectClass::COUNT];
    train.labels.iter().for_each(|&y| present[y] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(MlpError::InsufficientData(
            "training data holds fewer than two classes".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut dims = vec![dim];
    dims.extend(&hyper.hidden);
    dims.push(classes);
    let mut net = Network::he_init(&dims, &mut rng);

    let standardizer = Standardizer::fit(&train.features);
    let xs: Vec<Vec<f64>> = train.features.iter().map(|x| standardizer.transform(x)).collect();
    let val_xs: Vec<Vec<f64>> = val.features.iter().map(|x| standardizer.transform(x)).collect();

    let mut params = net.flatten();
    let mut adam = Adam::new(params.len(), hyper.learning_rate);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut summary = TrainingSummary::default();
    let mut best = (f64::INFINITY, net.clone(), 0usize);
    let mut stale = 0;

    for epoch in 0..hyper.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            let bx: Vec<Vec<f64>> = batch.iter().map(|&i| xs[i].clone()).collect();
            let by: Vec<usize> = batch.iter().map(|&i| train.labels[i]).collect();
            let masks: Option<Vec<Vec<Vec<f64>>>> = (hyper.dropout > 0.0).then(|| {
                batch
                    .iter()
                    .map(|_| dropout_masks(&hyper.hidden, hyper.dropout, &mut rng))
                    .collect()
            });
            let (loss, grads) = net.loss_and_gradients(&bx, &by, hyper.l2, masks.as_deref());
            epoch_loss += loss * batch.len() as f64;
            adam.step(&mut params, &grads.flatten());
            net.set_flat(&params);
        }
        let val_loss = net.cross_entropy(&val_xs, &val.labels);
        summary.train_loss.push(epoch_loss / xs.len() as f64);
        summary.val_loss.push(val_loss);
        summary.epochs_run = epoch + 1;

        if val_loss < best.0 {
            best = (val_loss, net.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= hyper.patience {
                break;
            }
        }
    }

    let (_, net, best_epoch) = best;
    summary.best_epoch = best_epoch;
    let predictions: Vec<usize> = val_xs.iter().map(|x| net.predict(x).argmax()).collect();
    let f1 = macro_f1(&predictions, &val.labels, classes).expect("validated non-empty split");
    let model = MlpModel {
        network: net,
        standardizer,
        hyper: hyper.clone(),
        f1,
        summary,
    };
    Ok((model, f1))
}
