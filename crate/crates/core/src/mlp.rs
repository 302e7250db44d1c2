//! Fixed-shape feed-forward classifier: `input -> 20 tanh -> 10 ReLU -> 1 linear`.
//!
//! The linear output is a logit. Training minimizes binary cross-entropy on
//! `sigmoid(logit)` with Adam, and scores are `sigmoid(logit)`. Dropout on the
//! hidden activations is inverted (survivors scaled by `1 / (1 - p)`), so
//! evaluation needs no rescaling.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{seeded, Stream};

pub const HIDDEN_TANH: usize = 20;
pub const HIDDEN_RELU: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub sizes: [usize; 4],
    pub activations: [Activation; 3],
}

impl LayerSpec {
    pub fn new(input_dim: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Dim("input dimension must be at least 1".into()));
        }
        Ok(Self {
            sizes: [input_dim, HIDDEN_TANH, HIDDEN_RELU, 1],
            activations: [Activation::Tanh, Activation::Relu, Activation::Identity],
        })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }
}

/// Fully connected layer; `weights` is `inputs x outputs`, row-major.
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

    /// `out = x W + b`
    fn affine(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
    }

    /// Accumulates `dW += x^T g`, `db += g`, and writes `dx = g W^T`.
    fn backward(&self, x: &[f64], g: &[f64], grad: &mut Dense, dx: Option<&mut [f64]>) {
        for (b, gi) in grad.bias.iter_mut().zip(g) {
            *b += gi;
        }
        for (i, &xi) in x.iter().enumerate() {
            let row = &mut grad.weights[i * self.outputs..(i + 1) * self.outputs];
            for (w, gj) in row.iter_mut().zip(g) {
                *w += xi * gj;
            }
        }
        if let Some(dx) = dx {
            for (i, d) in dx.iter_mut().enumerate() {
                let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
                *d = row.iter().zip(g).map(|(w, gj)| w * gj).sum();
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub spec: LayerSpec,
    pub seed: u64,
    pub layers: Vec<Dense>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DropoutPlacement {
    /// After both hidden layers.
    #[default]
    Both,
    /// After the tanh layer only.
    First,
    /// After the ReLU layer only.
    Second,
}

impl DropoutPlacement {
    fn applies(self, hidden_layer: usize) -> bool {
        matches!(
            (self, hidden_layer),
            (DropoutPlacement::Both, _) | (DropoutPlacement::First, 0) | (DropoutPlacement::Second, 1)
        )
    }
}

/// Dropout settings for a training-mode forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub p: f64,
    pub placement: DropoutPlacement,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub dropout_p: f64,
    pub dropout_placement: DropoutPlacement,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            learning_rate: 0.001,
            dropout_p: 0.2,
            dropout_placement: DropoutPlacement::Both,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Spec(format!("dropout_p must be in [0, 1), got {}", self.dropout_p)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Spec(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Spec("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::Spec("Adam needs beta1, beta2 in [0, 1) and epsilon > 0".into()));
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of `sigmoid(z)` against `y`, computed stably.
fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

/// Intermediate values of one sample's forward pass.
struct Trace {
    h1: Vec<f64>,
    mask1: Vec<f64>,
    z2: Vec<f64>,
    h2: Vec<f64>,
    mask2: Vec<f64>,
    logit: f64,
}

impl Trace {
    fn new() -> Self {
        Self {
            h1: vec![0.0; HIDDEN_TANH],
            mask1: vec![1.0; HIDDEN_TANH],
            z2: vec![0.0; HIDDEN_RELU],
            h2: vec![0.0; HIDDEN_RELU],
            mask2: vec![1.0; HIDDEN_RELU],
            logit: 0.0,
        }
    }
}

fn fill_mask(mask: &mut [f64], p: f64, rng: &mut ChaCha8Rng) {
    let keep = 1.0 / (1.0 - p);
    for m in mask.iter_mut() {
        *m = if rng.gen::<f64>() < p { 0.0 } else { keep };
    }
}

/// Draws a fresh mask for `hidden_layer` when dropout applies there, else all ones.
fn set_mask(mask: &mut [f64], hidden_layer: usize, dropout: &mut Option<(&Dropout, &mut ChaCha8Rng)>) {
    match dropout {
        Some((d, rng)) if d.placement.applies(hidden_layer) => fill_mask(mask, d.p, rng),
        _ => mask.fill(1.0),
    }
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases.
    pub fn init(input_dim: usize, seed: u64) -> Result<Self> {
        let spec = LayerSpec::new(input_dim)?;
        let mut rng = seeded(seed, Stream::Init);
        let layers = spec
            .sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut layer = Dense::zeros(fan_in, fan_out);
                for x in &mut layer.weights {
                    *x = rng.gen_range(-limit..limit);
                }
                layer
            })
            .collect();
        Ok(Self { spec, seed, layers })
    }

    /// Same shapes, every parameter zero.
    pub fn zeroed(input_dim: usize) -> Result<Self> {
        let spec = LayerSpec::new(input_dim)?;
        let layers = spec.sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Self { spec, seed: 0, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.input_dim() {
            return Err(Error::Dim(format!(
                "model expects {} features, got {width}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn param_slices(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    fn param_slices_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weights, &mut l.bias])
    }

    pub fn is_finite(&self) -> bool {
        self.param_slices().all(|s| s.iter().all(|x| x.is_finite()))
    }

    fn forward_one(&self, x: &[f64], t: &mut Trace, dropout: Option<(&Dropout, &mut ChaCha8Rng)>) {
        let [l1, l2, l3] = &self.layers[..] else {
            unreachable!("three layers")
        };
        l1.affine(x, &mut t.h1);
        t.h1.iter_mut().for_each(|v| *v = v.tanh());
        let mut dropout = dropout;
        set_mask(&mut t.mask1, 0, &mut dropout);
        let mut dropped1 = t.h1.clone();
        for (v, m) in dropped1.iter_mut().zip(&t.mask1) {
            *v *= m;
        }
        l2.affine(&dropped1, &mut t.z2);
        for (h, z) in t.h2.iter_mut().zip(&t.z2) {
            *h = z.max(0.0);
        }
        set_mask(&mut t.mask2, 1, &mut dropout);
        let dropped2: Vec<f64> = t.h2.iter().zip(&t.mask2).map(|(h, m)| h * m).collect();
        let mut out = [0.0];
        l3.affine(&dropped2, &mut out);
        t.logit = out[0];
    }

    /// Accumulates the loss gradient for one sample into `grad`, scaled by
    /// `weight`, and returns the sample loss.
    fn backward_one(&self, x: &[f64], y: f64, t: &Trace, weight: f64, grad: &mut MlpModel) -> f64 {
        let dlogit = (sigmoid(t.logit) - y) * weight;
        let dropped1: Vec<f64> = t.h1.iter().zip(&t.mask1).map(|(h, m)| h * m).collect();
        let dropped2: Vec<f64> = t.h2.iter().zip(&t.mask2).map(|(h, m)| h * m).collect();

        let (g_first, g_rest) = grad.layers.split_at_mut(1);
        let (g_second, g_third) = g_rest.split_at_mut(1);

        let mut d_dropped2 = vec![0.0; HIDDEN_RELU];
        self.layers[2].backward(&dropped2, &[dlogit], &mut g_third[0], Some(&mut d_dropped2));
        let dz2: Vec<f64> = d_dropped2
            .iter()
            .zip(&t.mask2)
            .zip(&t.z2)
            .map(|((g, m), z)| if *z > 0.0 { g * m } else { 0.0 })
            .collect();

        let mut d_dropped1 = vec![0.0; HIDDEN_TANH];
        self.layers[1].backward(&dropped1, &dz2, &mut g_second[0], Some(&mut d_dropped1));
        let dz1: Vec<f64> = d_dropped1
            .iter()
            .zip(&t.mask1)
            .zip(&t.h1)
            .map(|((g, m), h)| g * m * (1.0 - h * h))
            .collect();
        self.layers[0].backward(x, &dz1, &mut g_first[0], None);

        bce_with_logit(t.logit, y)
    }

    /// Raw logits; evaluation mode when `dropout` is `None`.
    pub fn logits(&self, rows: &Matrix, dropout: Option<Dropout>) -> Result<Vec<f64>> {
        self.check_width(rows.ncols())?;
        let mut trace = Trace::new();
        let mut rng = dropout.map(|d| seeded(d.seed, Stream::Dropout));
        Ok(rows
            .rows()
            .map(|x| {
                let dd = dropout.as_ref().zip(rng.as_mut());
                self.forward_one(x, &mut trace, dd);
                trace.logit
            })
            .collect())
    }

    /// Scores `sigmoid(logit)` in (0, 1).
    pub fn forward(&self, rows: &Matrix, dropout: Option<Dropout>) -> Result<Vec<f64>> {
        Ok(self.logits(rows, dropout)?.into_iter().map(sigmoid).collect())
    }

    /// Mean loss and its gradient over `rows`, dropout off.
    pub fn loss_and_gradient(&self, rows: &Matrix, labels: &[bool]) -> Result<(f64, MlpModel)> {
        self.check_width(rows.ncols())?;
        let mut grad = MlpModel::zeroed(self.input_dim())?;
        let mut trace = Trace::new();
        let w = 1.0 / rows.nrows().max(1) as f64;
        let mut loss = 0.0;
        for (x, &y) in rows.rows().zip(labels) {
            self.forward_one(x, &mut trace, None);
            loss += self.backward_one(x, f64::from(u8::from(y)), &trace, w, &mut grad) * w;
        }
        Ok((loss, grad))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: MlpModel = serde_json::from_str(text).map_err(|e| Error::Spec(format!("bad model file: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let shapes_ok = self.layers.len() == 3
            && self
                .layers
                .iter()
                .zip(self.spec.sizes.windows(2))
                .all(|(l, w)| {
                    l.inputs == w[0] && l.outputs == w[1] && l.weights.len() == w[0] * w[1] && l.bias.len() == w[1]
                });
        if !shapes_ok || self.spec != LayerSpec::new(self.input_dim())? {
            return Err(Error::Dim("model layers do not match the fixed layer spec".into()));
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("model has non-finite parameters".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl From<&TrainConfig> for AdamHyper {
    fn from(c: &TrainConfig) -> Self {
        Self {
            learning_rate: c.learning_rate,
            beta1: c.beta1,
            beta2: c.beta2,
            epsilon: c.epsilon,
        }
    }
}

/// One bias-corrected Adam update of a parameter slice at step `t` (1-based).
pub fn adam_update(param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], t: u64, hp: &AdamHyper) {
    let c1 = 1.0 - hp.beta1.powi(t as i32);
    let c2 = 1.0 - hp.beta2.powi(t as i32);
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g;
        v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        param[i] -= hp.learning_rate * m_hat / (v_hat.sqrt() + hp.epsilon);
    }
}

/// Moment accumulators mirroring a model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(model: &MlpModel) -> Self {
        let zeros: Vec<Vec<f64>> = model.param_slices().map(|s| vec![0.0; s.len()]).collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn apply(&mut self, model: &mut MlpModel, grad: &MlpModel, hp: &AdamHyper) {
        self.step += 1;
        let grads: Vec<&[f64]> = grad.param_slices().collect();
        for (((p, g), m), v) in model
            .param_slices_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            adam_update(p, g, m, v, self.step, hp);
        }
    }
}

/// Trains a copy of `model` on the active features of `train_set`.
/// Returns the trained model and the per-epoch mean loss.
pub fn train(model: &MlpModel, train_set: &Dataset, cfg: &TrainConfig) -> Result<(MlpModel, Vec<f64>)> {
    train_matrix(model, &train_set.feature_matrix(), &train_set.labels(), cfg)
}

pub fn train_matrix(model: &MlpModel, x: &Matrix, labels: &[bool], cfg: &TrainConfig) -> Result<(MlpModel, Vec<f64>)> {
    cfg.validate()?;
    if x.nrows() == 0 {
        return Err(Error::Empty("training set is empty".into()));
    }
    model.check_width(x.ncols())?;
    assert_eq!(x.nrows(), labels.len(), "row/label count mismatch");

    let hp = AdamHyper::from(cfg);
    let mut model = model.clone();
    let mut adam = AdamState::new(&model);
    let mut shuffle_rng = seeded(cfg.seed, Stream::Shuffle);
    let mut dropout_rng = seeded(cfg.seed, Stream::Dropout);
    let dropout = Dropout {
        p: cfg.dropout_p,
        placement: cfg.dropout_placement,
        seed: cfg.seed,
    };
    let use_dropout = cfg.dropout_p > 0.0;

    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut trace = Trace::new();
    let mut grad = MlpModel::zeroed(model.input_dim())?;
    let mut losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.param_slices_mut().for_each(|s| s.iter_mut().for_each(|g| *g = 0.0));
            let w = 1.0 / batch.len() as f64;
            for &i in batch {
                let row = x.row(i);
                let dd = use_dropout.then_some((&dropout, &mut dropout_rng));
                model.forward_one(row, &mut trace, dd);
                epoch_loss += model.backward_one(row, f64::from(u8::from(labels[i])), &trace, w, &mut grad);
            }
            adam.apply(&mut model, &grad, &hp);
        }
        let mean = epoch_loss / x.nrows() as f64;
        if !mean.is_finite() || !model.is_finite() {
            return Err(Error::NonFinite(format!(
                "training diverged at epoch {} (loss {mean}); check preprocessing for infinite or huge inputs",
                epoch + 1
            )));
        }
        losses.push(mean);
    }
    Ok((model, losses))
}

/// Hard labels (`score >= threshold`) and the scores behind them.
pub fn predict_labels(model: &MlpModel, d: &Dataset, threshold: f64) -> Result<(Vec<bool>, Vec<f64>)> {
    let scores = model.forward(&d.feature_matrix(), None)?;
    Ok((scores.iter().map(|&s| s >= threshold).collect(), scores))
}

/// Denominator floor for [`gradient_check`]'s relative error, so that
/// parameters whose true gradient is (numerically) zero do not divide
/// finite-difference noise by zero.
pub const GRADIENT_CHECK_FLOOR: f64 = 1e-8;
pub const GRADIENT_CHECK_STEP: f64 = 1e-5;

/// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)` over
/// all parameters, with central differences of the single-sample loss.
pub fn gradient_check(model: &MlpModel, features: &[f64], label: bool) -> Result<f64> {
    let x = Matrix::from_row_major(1, features.len(), features.to_vec());
    let labels = [label];
    let (_, analytic) = model.loss_and_gradient(&x, &labels)?;
    let analytic: Vec<f64> = analytic.param_slices().flatten().copied().collect();

    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let mut k = 0;
    for layer in 0..probe.layers.len() {
        for which in 0..2 {
            let len = if which == 0 {
                probe.layers[layer].weights.len()
            } else {
                probe.layers[layer].bias.len()
            };
            for i in 0..len {
                let original = param_at(&probe, layer, which, i);
                set_param(&mut probe, layer, which, i, original + GRADIENT_CHECK_STEP);
                let plus = probe.loss_and_gradient(&x, &labels)?.0;
                set_param(&mut probe, layer, which, i, original - GRADIENT_CHECK_STEP);
                let minus = probe.loss_and_gradient(&x, &labels)?.0;
                set_param(&mut probe, layer, which, i, original);
                let numeric = (plus - minus) / (2.0 * GRADIENT_CHECK_STEP);
                let a = analytic[k];
                let denom = a.abs().max(numeric.abs()).max(GRADIENT_CHECK_FLOOR);
                worst = worst.max((a - numeric).abs() / denom);
                k += 1;
            }
        }
    }
    Ok(worst)
}

fn param_at(m: &MlpModel, layer: usize, which: usize, i: usize) -> f64 {
    if which == 0 {
        m.layers[layer].weights[i]
    } else {
        m.layers[layer].bias[i]
    }
}

fn set_param(m: &mut MlpModel, layer: usize, which: usize, i: usize, v: f64) {
    if which == 0 {
        m.layers[layer].weights[i] = v;
    } else {
        m.layers[layer].bias[i] = v;
    }
}
