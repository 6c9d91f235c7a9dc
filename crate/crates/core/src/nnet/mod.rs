//! A small multilayer perceptron trained from scratch with Nesterov SGD.
//!
//! Weights are stored input-major (`fan_in x fan_out`) so a forward pass is
//! `relu(x W + b)` per hidden layer followed by a linear head.

mod augment;
pub mod checkpoint;

pub use augment::{augment, AugmentPolicy};

use std::path::PathBuf;
use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::envsim::LabeledBatch;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub activation: Activation,
}

/// Parameter-shaped gradient (or momentum) buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    fn zeros_like(p: &Predictor) -> Self {
        Gradients {
            weights: p.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: p.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Deterministic fan-in scaled uniform initialization: hidden layers use
/// the ReLU gain `sqrt(6 / fan_in)`, the head `1 / sqrt(fan_in)`; biases 0.
pub fn init_predictor(layer_sizes: &[usize], seed: u64) -> Result<Predictor> {
    if layer_sizes.len() < 2 {
        return Err(Error::Validation(format!(
            "a predictor needs at least 2 layer sizes, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Validation(format!("layer sizes must be positive: {layer_sizes:?}")));
    }
    let mut rng = rng::rng_for(seed, &[0x696e_6974]);
    let layers = layer_sizes.len() - 1;
    let mut weights = Vec::with_capacity(layers);
    let mut biases = Vec::with_capacity(layers);
    for l in 0..layers {
        let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
        let bound = if l + 1 == layers {
            1.0 / (fan_in as f64).sqrt()
        } else {
            (6.0 / fan_in as f64).sqrt()
        };
        weights.push(Array2::from_shape_fn((fan_in, fan_out), |_| {
            rng.random_range(-bound..bound)
        }));
        biases.push(Array1::zeros(fan_out));
    }
    Ok(Predictor {
        layer_sizes: layer_sizes.to_vec(),
        weights,
        biases,
        activation: Activation::Relu,
    })
}

fn relu_inplace(a: &mut Array2<f64>) {
    a.mapv_inplace(|v| v.max(0.0));
}

fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    out
}

/// Index of the largest score; ties go to the lower class index.
pub fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

impl Predictor {
    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().expect("validated layer sizes")
    }

    fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Validation(format!(
                "input has {} features but predictor expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Post-activation outputs of every layer; the last entry is the logits.
    fn activations(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.num_layers());
        let mut cur: Array2<f64> = x.to_owned();
        for l in 0..self.num_layers() {
            let mut z = cur.dot(&self.weights[l]) + &self.biases[l];
            if l + 1 < self.num_layers() {
                relu_inplace(&mut z);
            }
            acts.push(z.clone());
            cur = z;
        }
        acts
    }

    /// Class scores, one row per sample.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        Ok(self.activations(x).pop().expect("at least one layer"))
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(softmax_rows(&self.forward(x)?))
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let scores = self.forward(x)?;
        Ok(scores.rows().into_iter().map(argmax).collect())
    }

    /// Penultimate-layer activations (the input itself for a head-only model).
    pub fn encode_features(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut acts = self.activations(x.view());
        acts.pop();
        Ok(acts.pop().unwrap_or_else(|| x.to_owned()))
    }

    /// Mean softmax cross-entropy and its gradient (no weight decay).
    pub fn loss_and_grad(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, Gradients)> {
        self.backprop(x, labels).map(|(loss, grads, _)| (loss, grads))
    }

    /// Loss, gradient and the number of argmax mistakes on the batch.
    fn backprop(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, Gradients, usize)> {
        self.check_input(&x)?;
        let n = x.nrows();
        if labels.len() != n || n == 0 {
            return Err(Error::Validation("labels must match a non-empty input".into()));
        }
        let classes = self.num_classes();
        if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Validation(format!("label {l} >= head width {classes}")));
        }
        let acts = self.activations(x.view());
        let logits = acts.last().expect("at least one layer");
        let probs = softmax_rows(logits);
        let loss = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| -(probs[[i, y]].max(1e-300)).ln())
            .sum::<f64>()
            / n as f64;
        let wrong = logits
            .rows()
            .into_iter()
            .zip(labels)
            .filter(|(row, &y)| argmax(row.view()) != y)
            .count();

        let mut delta = probs;
        for (i, &y) in labels.iter().enumerate() {
            delta[[i, y]] -= 1.0;
        }
        delta.mapv_inplace(|v| v / n as f64);

        let mut grads = Gradients::zeros_like(self);
        for l in (0..self.num_layers()).rev() {
            let input = if l == 0 { x.view() } else { acts[l - 1].view() };
            grads.weights[l] = input.t().dot(&delta);
            grads.biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l].t());
                back.zip_mut_with(&acts[l - 1], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        Ok((loss, grads, wrong))
    }

    pub fn loss(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
        Ok(self.loss_and_grad(x, labels)?.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    Cosine,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainMode {
    #[default]
    Scratch,
    LinearProbeThenFinetune,
    FinetuneFrom { checkpoint: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub schedule: Schedule,
    pub mode: TrainMode,
    pub augment: Option<AugmentPolicy>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 128,
            lr: 0.01,
            weight_decay: 1e-5,
            momentum: 0.9,
            schedule: Schedule::Cosine,
            mode: TrainMode::Scratch,
            augment: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Validation("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Validation("batch_size must be >= 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Validation(format!("lr must be > 0, got {}", self.lr)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Validation("weight_decay must be >= 0".into()));
        }
        if !(self.momentum.is_finite() && (0.0..1.0).contains(&self.momentum)) {
            return Err(Error::Validation(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        Ok(())
    }

    /// Learning rate used during epoch `t` of `epochs`.
    pub fn lr_at(&self, t: usize) -> f64 {
        schedule_lr(self.schedule, self.lr, t, self.epochs)
    }

    /// Number of leading head-only epochs.
    pub fn probe_epochs(&self) -> usize {
        match self.mode {
            TrainMode::LinearProbeThenFinetune => self.epochs / 2,
            _ => 0,
        }
    }
}

/// `lr (1 + cos(pi t / T)) / 2` for the cosine schedule.
pub fn schedule_lr(schedule: Schedule, base: f64, t: usize, total: usize) -> f64 {
    match schedule {
        Schedule::Constant => base,
        Schedule::Cosine => {
            let frac = t as f64 / total.max(1) as f64;
            base * (1.0 + (std::f64::consts::PI * frac).cos()) / 2.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_error: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub wall_time: f64,
}

pub fn train(p: &Predictor, data: &LabeledBatch, cfg: &TrainConfig) -> Result<(Predictor, TrainHistory)> {
    train_observed(p, data, cfg, |_, _| {})
}

/// Like [`train`], calling `observer(epoch, &predictor)` after every epoch.
pub fn train_observed(
    p: &Predictor,
    data: &LabeledBatch,
    cfg: &TrainConfig,
    mut observer: impl FnMut(usize, &Predictor),
) -> Result<(Predictor, TrainHistory)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Validation("cannot train on an empty batch".into()));
    }
    data.check_labels(p.num_classes())?;
    let started = Instant::now();

    let mut model = match &cfg.mode {
        TrainMode::FinetuneFrom { checkpoint } => {
            let loaded = checkpoint::load(checkpoint)?;
            if loaded.layer_sizes != p.layer_sizes {
                return Err(Error::Checkpoint(format!(
                    "checkpoint layers {:?} do not match predictor layers {:?}",
                    loaded.layer_sizes, p.layer_sizes
                )));
            }
            loaded
        }
        _ => p.clone(),
    };
    if data.dim() != model.input_dim() {
        return Err(Error::Validation(format!(
            "data has {} features but predictor expects {}",
            data.dim(),
            model.input_dim()
        )));
    }

    let head = model.num_layers() - 1;
    let mut velocity = Gradients::zeros_like(&model);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();
    let probe = cfg.probe_epochs();

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        let epoch_data;
        let source = match &cfg.augment {
            Some(policy) => {
                epoch_data = augment(data, policy, rng::derive(cfg.seed, &[0x617567, epoch as u64]))?;
                &epoch_data
            }
            None => data,
        };
        order.shuffle(&mut rng::rng_for(cfg.seed, &[0x7368_7566, epoch as u64]));

        let mut loss_sum = 0.0;
        let mut wrong = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let x = source.features.select(Axis(0), chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| source.labels[i]).collect();
            let (loss, grads, mistakes) = model.backprop(x.view(), &y)?;
            wrong += mistakes;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    detail: format!("non-finite loss {loss}"),
                });
            }
            loss_sum += loss * chunk.len() as f64;
            let first = if epoch < probe { head } else { 0 };
            for l in first..model.num_layers() {
                nesterov(&mut model.weights[l], &grads.weights[l], &mut velocity.weights[l], lr, cfg);
                nesterov(&mut model.biases[l], &grads.biases[l], &mut velocity.biases[l], lr, cfg);
            }
        }
        let train_loss = loss_sum / data.len() as f64;
        if !train_loss.is_finite() || !model.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                detail: "parameters became non-finite".into(),
            });
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            train_error: wrong as f64 / data.len() as f64,
            lr,
        });
        observer(epoch, &model);
    }
    history.wall_time = started.elapsed().as_secs_f64();
    Ok((model, history))
}

/// PyTorch-style Nesterov SGD with coupled weight decay.
fn nesterov<D: ndarray::Dimension>(
    param: &mut ndarray::Array<f64, D>,
    grad: &ndarray::Array<f64, D>,
    vel: &mut ndarray::Array<f64, D>,
    lr: f64,
    cfg: &TrainConfig,
) {
    let mu = cfg.momentum;
    let wd = cfg.weight_decay;
    ndarray::Zip::from(param).and(grad).and(vel).for_each(|w, &g, v| {
        let g = g + wd * *w;
        *v = mu * *v + g;
        *w -= lr * (g + mu * *v);
    });
}

/// 0-1 error rate of argmax predictions.
pub fn evaluate(p: &Predictor, data: &LabeledBatch) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Validation("cannot evaluate on an empty batch".into()));
    }
    let preds = p.predict(data.features.view())?;
    let wrong = preds.iter().zip(&data.labels).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / data.len() as f64)
}

/// Penultimate-layer representation of every row of `data`.
pub fn encode(p: &Predictor, data: &LabeledBatch) -> Result<Array2<f64>> {
    p.encode_features(data.features.view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn xor() -> LabeledBatch {
        LabeledBatch::new(
            array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]],
            vec![0, 1, 1, 0],
            vec!["xor".into(); 4],
        )
        .unwrap()
    }

    #[test]
    fn init_is_deterministic_and_counts_params() {
        let a = init_predictor(&[2, 16, 2], 0).unwrap();
        assert_eq!(a, init_predictor(&[2, 16, 2], 0).unwrap());
        let b = init_predictor(&[64, 32, 10], 1).unwrap();
        assert_eq!(b.num_params(), 64 * 32 + 32 + 32 * 10 + 10);
        let zero = Array2::zeros((3, 64));
        assert!(b.forward(zero.view()).unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn init_rejects_bad_sizes() {
        assert!(init_predictor(&[4], 0).is_err());
        assert!(init_predictor(&[4, 0, 2], 0).is_err());
    }

    #[test]
    fn cosine_endpoints() {
        assert_eq!(schedule_lr(Schedule::Cosine, 0.01, 0, 50), 0.01);
        assert!(schedule_lr(Schedule::Cosine, 0.01, 50, 50).abs() < 1e-12);
        assert_eq!(schedule_lr(Schedule::Constant, 0.01, 33, 50), 0.01);
    }

    #[test]
    fn history_follows_schedule() {
        let cfg = TrainConfig { epochs: 7, batch_size: 4, ..TrainConfig::default() };
        let p = init_predictor(&[2, 8, 2], 3).unwrap();
        let (_, hist) = train(&p, &xor(), &cfg).unwrap();
        assert_eq!(hist.epochs.len(), 7);
        for (t, rec) in hist.epochs.iter().enumerate() {
            assert_eq!(rec.lr, cfg.lr_at(t));
        }
    }

    #[test]
    fn xor_is_learned() {
        let cfg = TrainConfig {
            epochs: 500,
            batch_size: 4,
            lr: 0.1,
            ..TrainConfig::default()
        };
        let p = init_predictor(&[2, 8, 2], 0).unwrap();
        let (fit, hist) = train(&p, &xor(), &cfg).unwrap();
        assert_eq!(evaluate(&fit, &xor()).unwrap(), 0.0);
        assert_eq!(hist.epochs.last().unwrap().train_error, 0.0);
    }

    #[test]
    fn probe_phase_freezes_body() {
        let cfg = TrainConfig {
            epochs: 6,
            batch_size: 2,
            lr: 0.05,
            mode: TrainMode::LinearProbeThenFinetune,
            ..TrainConfig::default()
        };
        let p = init_predictor(&[2, 8, 8, 2], 5).unwrap();
        let mut snapshots = Vec::new();
        let (fit, _) = train_observed(&p, &xor(), &cfg, |_, m| snapshots.push(m.clone())).unwrap();
        // epochs 0..3 are head-only
        for snap in &snapshots[..3] {
            assert_eq!(snap.weights[..2], p.weights[..2]);
            assert_eq!(snap.biases[..2], p.biases[..2]);
        }
        assert_ne!(snapshots[2].weights[2], p.weights[2]);
        assert_ne!(fit.weights[0], p.weights[0]);
    }

    #[test]
    fn constant_scores_give_half_error_on_balanced_data() {
        let mut p = init_predictor(&[2, 2], 0).unwrap();
        p.weights[0].fill(0.0);
        assert_eq!(evaluate(&p, &xor()).unwrap(), 0.5);
    }

    #[test]
    fn diverging_lr_is_reported_with_epoch() {
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 4,
            lr: 1e6,
            momentum: 0.0,
            schedule: Schedule::Constant,
            ..TrainConfig::default()
        };
        let data = LabeledBatch::new(
            array![[100.0, -50.0], [-80.0, 90.0], [70.0, 60.0], [-90.0, -40.0]],
            vec![0, 1, 1, 0],
            vec!["x".into(); 4],
        )
        .unwrap();
        let p = init_predictor(&[2, 32, 2], 0).unwrap();
        match train(&p, &data, &cfg) {
            Err(Error::TrainingDiverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn encode_width_is_penultimate() {
        let p = init_predictor(&[2, 16, 5, 2], 0).unwrap();
        let reps = encode(&p, &xor()).unwrap();
        assert_eq!(reps.dim(), (4, 5));
        let same = LabeledBatch::new(array![[0.3, 0.3], [0.3, 0.3]], vec![0, 0], vec!["a".into(); 2]).unwrap();
        let r = encode(&p, &same).unwrap();
        assert_eq!(r.row(0), r.row(1));
    }

    #[test]
    fn wrong_label_range_is_rejected() {
        let p = init_predictor(&[2, 4, 2], 0).unwrap();
        let bad = LabeledBatch::new(array![[0.0, 0.0]], vec![3], vec!["a".into()]).unwrap();
        assert!(train(&p, &bad, &TrainConfig::default()).is_err());
    }
}
