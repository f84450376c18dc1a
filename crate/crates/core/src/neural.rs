//! Dense multilayer perceptron trained with ADAM.
//!
//! Hidden layers use ReLU, the output layer a max-shifted softmax with
//! categorical cross-entropy. Weights are drawn uniformly from
//! `init_bounds` through the entropy source, layer by layer and row-major
//! over `[output][input]`; biases and ADAM moments start at zero. Epoch
//! shuffling continues the same source, so a model is a function of one
//! stream.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::Dataset;
use crate::entropy::{EntropyError, EntropyKind, EntropySource};
use crate::trees::argmax_lowest;

/// Pre-activations at or below this magnitude are treated as sitting on a
/// ReLU kink by [`gradient_check`].
pub const KINK_EXCLUSION: f64 = 1e-4;
pub const GRADIENT_CHECK_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared on an absolute scale.
const RELATIVE_ERROR_FLOOR: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("row has {got} features, network expects {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("loss became non-finite at step {step}")]
    NonFiniteLoss { step: u64 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

pub type Result<T> = std::result::Result<T, NeuralError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self { alpha: 0.001, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    /// Linear hidden layers; only useful for exact-gradient tests.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// `[inputs, hidden…, classes]`
    pub layer_sizes: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamParams,
    pub init_bounds: (f64, f64),
    pub activation: Activation,
}

impl MlpConfig {
    pub fn new(layer_sizes: Vec<usize>) -> Self {
        Self {
            layer_sizes,
            epochs: 20,
            batch_size: 32,
            adam: AdamParams::default(),
            init_bounds: (-0.5, 0.5),
            activation: Activation::Relu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NeuralError::InvalidConfig(m));
        if self.layer_sizes.len() < 3 {
            return bad(format!("need input, >= 1 hidden and output layer, got {:?}", self.layer_sizes));
        }
        if self.layer_sizes.contains(&0) {
            return bad("layer sizes must be positive".into());
        }
        let (lo, hi) = self.init_bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad(format!("init bounds ({lo}, {hi})"));
        }
        let a = &self.adam;
        if !(a.beta1 > 0.0 && a.beta1 < 1.0 && a.beta2 > 0.0 && a.beta2 < 1.0) {
            return bad(format!("adam betas ({}, {})", a.beta1, a.beta2));
        }
        if !(a.alpha >= 0.0 && a.alpha.is_finite() && a.epsilon > 0.0) {
            return bad(format!("adam alpha {} / epsilon {}", a.alpha, a.epsilon));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be >= 1".into());
        }
        Ok(())
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().expect("validated")
    }

    pub fn hash(&self) -> String {
        crate::short_hash(&serde_json::to_string(self).expect("config serializes"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub n_in: usize,
    pub n_out: usize,
    /// `[n_out][n_in]`, row-major.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub m_w: Vec<f64>,
    pub v_w: Vec<f64>,
    pub m_b: Vec<f64>,
    pub v_b: Vec<f64>,
}

impl DenseLayer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            biases: vec![0.0; n_out],
            m_w: vec![0.0; n_in * n_out],
            v_w: vec![0.0; n_in * n_out],
            m_b: vec![0.0; n_out],
            v_b: vec![0.0; n_out],
        }
    }

    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.n_in).zip(&self.biases).map(|(w, b)| b + dot(w, input)));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<DenseLayer>,
    pub activation: Activation,
    pub step_count: u64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize the reduction.
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4 * 4;
    for (x, y) in a[..chunks].chunks_exact(4).zip(b[..chunks].chunks_exact(4)) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = a[chunks..].iter().zip(&b[chunks..]).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Softmax with the max logit subtracted first.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-ln softmax(logits)[label]`, via log-sum-exp.
fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Per-layer outputs of one forward pass: `pre[l]` before activation,
/// `post[l]` after (`post` of the last layer holds the logits).
struct Trace {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct Gradients {
    w: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(model: &MlpModel) -> Self {
        Self {
            w: model.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            b: model.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.w.iter_mut().chain(self.b.iter_mut()).for_each(|g| g.fill(0.0));
    }

    fn scale(&mut self, s: f64) {
        self.w.iter_mut().chain(self.b.iter_mut()).flatten().for_each(|g| *g *= s);
    }
}

impl MlpModel {
    pub fn zeros(config: &MlpConfig) -> Result<Self> {
        config.validate()?;
        let layers = config.layer_sizes.windows(2).map(|w| DenseLayer::zeros(w[0], w[1])).collect();
        Ok(Self { layers, activation: config.activation, step_count: 0 })
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().expect("at least one layer").n_out
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.biases).all(|x| x.is_finite()))
    }

    /// Weights and biases as text; values print in shortest round-trip form,
    /// so equal text means bit-identical parameters.
    pub fn to_text(&self) -> String {
        let sizes: Vec<String> = std::iter::once(self.input_size())
            .chain(self.layers.iter().map(|l| l.n_out))
            .map(|s| s.to_string())
            .collect();
        let mut out =
            format!("mlp sizes={} activation={:?} steps={}\n", sizes.join(","), self.activation, self.step_count);
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, values) in [("weights", &layer.weights), ("biases", &layer.biases)] {
                let _ = write!(out, "layer {i} {name}");
                for v in values {
                    let _ = write!(out, " {v:?}");
                }
                out.push('\n');
            }
        }
        out
    }

    fn activate(&self, z: &mut [f64]) {
        if self.activation == Activation::Relu {
            z.iter_mut().for_each(|x| *x = x.max(0.0));
        }
    }

    fn derivative(&self, z: f64) -> f64 {
        match self.activation {
            Activation::Relu if z > 0.0 => 1.0,
            Activation::Relu => 0.0,
            Activation::Identity => 1.0,
        }
    }

    fn check_width(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.input_size() {
            return Err(NeuralError::WidthMismatch { expected: self.input_size(), got: row.len() });
        }
        Ok(())
    }

    fn trace(&self, row: &[f64]) -> Trace {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let input = if l == 0 { row } else { &post[l - 1] };
            let mut z = Vec::with_capacity(layer.n_out);
            layer.forward_into(input, &mut z);
            let mut a = z.clone();
            if l != last {
                self.activate(&mut a);
            }
            pre.push(z);
            post.push(a);
        }
        Trace { pre, post }
    }

    pub fn logits(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_width(row)?;
        Ok(self.trace(row).post.pop().expect("at least one layer"))
    }

    /// Accumulates the cross-entropy gradient of one sample; returns its loss.
    fn accumulate(&self, row: &[f64], label: usize, grads: &mut Gradients) -> f64 {
        let trace = self.trace(row);
        let logits = trace.post.last().expect("at least one layer");
        let loss = cross_entropy(logits, label);
        let mut delta = softmax(logits);
        delta[label] -= 1.0;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = if l == 0 { row } else { &trace.post[l - 1] };
            for (j, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, input, &mut grads.w[l][j * layer.n_in..(j + 1) * layer.n_in]);
                    grads.b[l][j] += d;
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; layer.n_in];
                for (j, &d) in delta.iter().enumerate() {
                    if d != 0.0 {
                        axpy(d, &layer.weights[j * layer.n_in..(j + 1) * layer.n_in], &mut prev);
                    }
                }
                for (p, &z) in prev.iter_mut().zip(&trace.pre[l - 1]) {
                    *p *= self.derivative(z);
                }
                delta = prev;
            }
        }
        loss
    }

    fn adam_step(&mut self, grads: &Gradients, adam: &AdamParams) {
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - adam.beta1.powi(t);
        let c2 = 1.0 - adam.beta2.powi(t);
        let update = |theta: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]| {
            for (((th, mi), vi), &gi) in theta.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g) {
                *mi = adam.beta1 * *mi + (1.0 - adam.beta1) * gi;
                *vi = adam.beta2 * *vi + (1.0 - adam.beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *th -= adam.alpha * m_hat / (v_hat.sqrt() + adam.epsilon);
            }
        };
        for (l, layer) in self.layers.iter_mut().enumerate() {
            update(&mut layer.weights, &mut layer.m_w, &mut layer.v_w, &grads.w[l]);
            update(&mut layer.biases, &mut layer.m_b, &mut layer.v_b, &grads.b[l]);
        }
    }

    fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases).copied()).collect()
    }

    fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for layer in &mut self.layers {
            if index < layer.weights.len() {
                return &mut layer.weights[index];
            }
            index -= layer.weights.len();
            if index < layer.biases.len() {
                return &mut layer.biases[index];
            }
            index -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }
}

pub fn init_model(config: &MlpConfig, entropy: &mut EntropySource) -> Result<MlpModel> {
    let mut model = MlpModel::zeros(config)?;
    let (lo, hi) = config.init_bounds;
    for layer in &mut model.layers {
        for w in &mut layer.weights {
            *w = entropy.next_bounded(lo, hi)?;
        }
    }
    Ok(model)
}

/// Class probabilities for one row.
pub fn forward(model: &MlpModel, row: &[f64]) -> Result<Vec<f64>> {
    Ok(softmax(&model.logits(row)?))
}

pub fn predict(model: &MlpModel, row: &[f64]) -> Result<usize> {
    Ok(argmax_lowest(&model.logits(row)?))
}

/// One pass over `train` in a freshly shuffled order; returns the mean
/// per-sample loss, each measured before its batch's update.
pub fn train_epoch(
    model: &mut MlpModel,
    train: &Dataset,
    config: &MlpConfig,
    entropy: &mut EntropySource,
) -> Result<f64> {
    if train.n_rows() == 0 {
        return Err(NeuralError::EmptyDataset);
    }
    model.check_width(train.row(0))?;
    let mut order: Vec<usize> = (0..train.n_rows()).collect();
    entropy.shuffle(&mut order)?;
    let mut grads = Gradients::zeros(model);
    let mut total_loss = 0.0;
    for batch in order.chunks(config.batch_size) {
        grads.clear();
        for &i in batch {
            total_loss += model.accumulate(train.row(i), train.label(i), &mut grads);
        }
        if !total_loss.is_finite() {
            return Err(NeuralError::NonFiniteLoss { step: model.step_count });
        }
        grads.scale(1.0 / batch.len() as f64);
        model.adam_step(&grads, &config.adam);
        if !model.all_finite() {
            return Err(NeuralError::NonFiniteLoss { step: model.step_count });
        }
    }
    Ok(total_loss / train.n_rows() as f64)
}

pub fn evaluate_accuracy(model: &MlpModel, test: &Dataset) -> Result<f64> {
    if test.n_rows() == 0 {
        return Err(NeuralError::EmptyDataset);
    }
    let mut correct = 0usize;
    for (row, label) in test.rows() {
        if predict(model, row)? == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.n_rows() as f64)
}

fn batch_loss(model: &MlpModel, batch: &[(&[f64], usize)]) -> f64 {
    let total: f64 = batch.iter().map(|&(row, label)| cross_entropy(&model.logits(row).expect("width"), label)).sum();
    total / batch.len() as f64
}

/// Largest relative disagreement between backprop and central differences
/// over the batch-mean loss. Parameters feeding a hidden unit whose
/// pre-activation lies within [`KINK_EXCLUSION`] of zero for some sample
/// (or any later hidden unit that does) are skipped. An empty batch gives 0.
pub fn gradient_check(model: &MlpModel, batch: &[(&[f64], usize)]) -> Result<f64> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    for &(row, _) in batch {
        model.check_width(row)?;
    }
    let mut grads = Gradients::zeros(model);
    let mut excluded: Vec<Vec<bool>> = model.layers.iter().map(|l| vec![false; l.n_out]).collect();
    let hidden = model.layers.len() - 1;
    for &(row, label) in batch {
        model.accumulate(row, label, &mut grads);
        if model.activation == Activation::Relu {
            let trace = model.trace(row);
            for (l, pre) in trace.pre.iter().enumerate().take(hidden) {
                for (j, z) in pre.iter().enumerate() {
                    if z.abs() <= KINK_EXCLUSION {
                        excluded[l][j] = true;
                    }
                }
            }
        }
    }
    grads.scale(1.0 / batch.len() as f64);

    // A kink in hidden layer l taints every parameter of layers 0..=l that
    // can move it; parameters of unit j in layer l are tainted by its own kink.
    let kink_at_or_after: Vec<bool> =
        (0..model.layers.len()).map(|l| excluded[l + 1..hidden.max(l + 1)].iter().flatten().any(|&e| e)).collect();

    let mut analytic = Vec::with_capacity(model.parameter_count());
    let mut skip = Vec::with_capacity(model.parameter_count());
    for (l, layer) in model.layers.iter().enumerate() {
        let tainted: Vec<bool> = excluded[l][..layer.n_out].iter().map(|&e| e || kink_at_or_after[l]).collect();
        for (row, &t) in grads.w[l].chunks_exact(layer.n_in).zip(&tainted) {
            analytic.extend_from_slice(row);
            skip.extend(std::iter::repeat_n(t, layer.n_in));
        }
        analytic.extend_from_slice(&grads.b[l]);
        skip.extend_from_slice(&tainted);
    }

    let base = model.params();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (p, (&a, &skipped)) in analytic.iter().zip(&skip).enumerate() {
        if skipped {
            continue;
        }
        *probe.param_mut(p) = base[p] + GRADIENT_CHECK_STEP;
        let up = batch_loss(&probe, batch);
        *probe.param_mut(p) = base[p] - GRADIENT_CHECK_STEP;
        let down = batch_loss(&probe, batch);
        *probe.param_mut(p) = base[p];
        let numeric = (up - down) / (2.0 * GRADIENT_CHECK_STEP);
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(RELATIVE_ERROR_FLOOR);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    /// Test accuracy after each epoch.
    pub accuracies: Vec<f64>,
    pub losses: Vec<f64>,
    /// Test accuracy of the freshly initialized network.
    pub initial_accuracy: f64,
    pub source_kind: EntropyKind,
    pub seed: u64,
    pub config_hash: String,
    /// Set when training diverged; the lists stop at the last good epoch.
    pub failure: Option<String>,
}

impl TrainingHistory {
    pub fn final_accuracy(&self) -> Option<f64> {
        if self.failure.is_some() {
            None
        } else {
            self.accuracies.last().copied()
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# config_hash={} kind={} seed={}\nepoch,accuracy,loss\n",
            self.config_hash, self.source_kind, self.seed
        );
        for (e, (acc, loss)) in self.accuracies.iter().zip(&self.losses).enumerate() {
            let _ = writeln!(out, "{},{},{}", e + 1, acc, loss);
        }
        out
    }
}

/// Initializes and trains a network, evaluating on `test` after every epoch.
/// Divergence is recorded in the history instead of returned as an error.
pub fn train_model(
    config: &MlpConfig,
    train: &Dataset,
    test: &Dataset,
    entropy: &mut EntropySource,
) -> Result<(MlpModel, TrainingHistory)> {
    let mut model = init_model(config, entropy)?;
    let mut history = TrainingHistory {
        accuracies: Vec::with_capacity(config.epochs),
        losses: Vec::with_capacity(config.epochs),
        initial_accuracy: evaluate_accuracy(&model, test)?,
        source_kind: entropy.provenance(),
        seed: entropy.seed(),
        config_hash: config.hash(),
        failure: None,
    };
    for _ in 0..config.epochs {
        match train_epoch(&mut model, train, config, entropy) {
            Ok(loss) => {
                history.losses.push(loss);
                history.accuracies.push(evaluate_accuracy(&model, test)?);
            }
            Err(e @ NeuralError::NonFiniteLoss { .. }) => {
                history.failure = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok((model, history))
}
