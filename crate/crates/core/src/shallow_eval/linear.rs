use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureTable, ShallowError};

/// Softmax with max subtraction, so any finite input is safe.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Binary perceptron: 1 iff `w·x + b > 0`.
pub fn perceptron_predict(w: &[f64], b: f64, x: &[f64]) -> Result<u8, ShallowError> {
    if w.len() != x.len() {
        return Err(ShallowError::DimensionMismatch { expected: w.len(), found: x.len() });
    }
    Ok(u8::from(dot(w, x) + b > 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Logistic,
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn activation(kind: Activation, x: f64) -> f64 {
    match kind {
        Activation::Tanh => x.tanh(),
        Activation::Logistic => logistic(x),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha0: f64,
    pub epochs: usize,
    pub decay_every: usize,
    pub gamma: f64,
    pub seed: u64,
    /// L2 penalty on weights (not biases); 0 disables it.
    #[serde(default)]
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { alpha0: 0.01, epochs: 30, decay_every: 10, gamma: 0.1, seed: 0, l2: 0.0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ShallowError> {
        let bad = |m: &str| Err(ShallowError::InvalidConfig(m.to_string()));
        if !(self.alpha0 >= 0.0 && self.alpha0.is_finite()) {
            return bad("alpha0 must be finite and non-negative");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.decay_every == 0 {
            return bad("decay_every must be at least 1");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be finite and non-negative");
        }
        Ok(())
    }
}

/// Step decay: `alpha0 * gamma^floor(epoch / decay_every)`.
pub fn lr_schedule(config: &TrainConfig, epoch: usize) -> f64 {
    config.alpha0 * config.gamma.powi((epoch / config.decay_every) as i32)
}

/// Multiclass linear scorer: `scores = W x + b`, `W` stored row-major C×d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub n_classes: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        LinearModel { n_classes, dim, weights: vec![0.0; n_classes * dim], bias: vec![0.0; n_classes] }
    }

    pub fn weight_row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.dim..(k + 1) * self.dim]
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_classes).map(|k| dot(self.weight_row(k), x) + self.bias[k]).collect()
    }

    /// Highest-scoring class; ties go to the lower index.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x))
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.scores(x))
    }

    /// Parameters flattened as `[weights..., bias...]`.
    pub fn params(&self) -> Vec<f64> {
        self.weights.iter().chain(&self.bias).copied().collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let nw = self.weights.len();
        self.weights.copy_from_slice(&p[..nw]);
        self.bias.copy_from_slice(&p[nw..]);
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Adds `scale * d(loss)/d(params)` for one sample to `grad` and returns the
/// sample's cross-entropy.
fn accumulate_sample(model: &LinearModel, x: &[f64], y: usize, scale: f64, grad: &mut LinearModel) -> f64 {
    let p = model.predict_proba(x);
    for (k, pk) in p.iter().enumerate() {
        let delta = pk - if k == y { 1.0 } else { 0.0 };
        let row = &mut grad.weights[k * model.dim..(k + 1) * model.dim];
        for (g, xi) in row.iter_mut().zip(x) {
            *g += scale * delta * xi;
        }
        grad.bias[k] += scale * delta;
    }
    -p[y].max(f64::MIN_POSITIVE).ln()
}

/// Mean cross-entropy over the table plus `l2/2 * ||W||²`.
pub fn softmax_loss(model: &LinearModel, data: &FeatureTable, l2: f64) -> f64 {
    let n = data.len() as f64;
    let ce: f64 = (0..data.len())
        .map(|i| {
            let p = model.predict_proba(data.row(i));
            -p[data.label(i)].max(f64::MIN_POSITIVE).ln()
        })
        .sum::<f64>()
        / n;
    ce + 0.5 * l2 * model.weights.iter().map(|w| w * w).sum::<f64>()
}

/// Analytic gradient of [`softmax_loss`].
pub fn softmax_gradient(model: &LinearModel, data: &FeatureTable, l2: f64) -> LinearModel {
    let mut grad = LinearModel::zeros(model.n_classes, model.dim);
    let scale = 1.0 / data.len() as f64;
    for i in 0..data.len() {
        accumulate_sample(model, data.row(i), data.label(i), scale, &mut grad);
    }
    for (g, w) in grad.weights.iter_mut().zip(&model.weights) {
        *g += l2 * w;
    }
    grad
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxFit {
    pub model: LinearModel,
    /// Full-data loss after each epoch.
    pub epoch_losses: Vec<f64>,
}

impl SoftmaxFit {
    pub fn final_loss(&self) -> f64 {
        *self.epoch_losses.last().expect("at least one epoch")
    }
}

/// Softmax regression by per-sample SGD from zero weights. Samples are
/// reshuffled every epoch from `config.seed`.
pub fn train_softmax(data: &FeatureTable, config: &TrainConfig) -> Result<SoftmaxFit, ShallowError> {
    config.validate()?;
    let present = data.class_counts();
    if present.len() < 2 {
        return Err(ShallowError::SingleClass);
    }
    let n_classes = data.n_classes();
    let mut model = LinearModel::zeros(n_classes, data.dim());
    let mut grad = LinearModel::zeros(n_classes, data.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = lr_schedule(config, epoch);
        order.shuffle(&mut rng);
        for &i in &order {
            grad.weights.iter_mut().for_each(|g| *g = 0.0);
            grad.bias.iter_mut().for_each(|g| *g = 0.0);
            accumulate_sample(&model, data.row(i), data.label(i), 1.0, &mut grad);
            for (w, g) in model.weights.iter_mut().zip(&grad.weights) {
                *w -= lr * (g + config.l2 * *w);
            }
            for (b, g) in model.bias.iter_mut().zip(&grad.bias) {
                *b -= lr * g;
            }
        }
        epoch_losses.push(softmax_loss(&model, data, config.l2));
    }
    Ok(SoftmaxFit { model, epoch_losses })
}
