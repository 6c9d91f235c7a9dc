//! Diversity-driven data selection.
//!
//! `Diver(B)` sums pairwise representation distances within a batch. A
//! factored logistic policy scores every sample, a perturbed top-k keeps a
//! fraction of each mini-batch, the predictor is fine-tuned on the kept
//! samples, and REINFORCE pushes the policy toward selections whose
//! representations are spread out.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::envsim::LabeledBatch;
use crate::error::{Error, Result};
use crate::nnet::{train, Activation, Predictor, Schedule, TrainConfig, TrainMode};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
    CosineDistance,
}

impl Metric {
    pub fn distance(self, a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
        match self {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
            Metric::CosineDistance => {
                let (na, nb) = (a.dot(&a).sqrt(), b.dot(&b).sqrt());
                if na == 0.0 || nb == 0.0 {
                    // undefined angle; equal zero vectors are at distance 0
                    if na == nb {
                        0.0
                    } else {
                        1.0
                    }
                } else {
                    (1.0 - a.dot(&b) / (na * nb)).max(0.0)
                }
            }
        }
    }
}

/// Sum of `d(v_i, v_j)` over unordered row pairs.
pub fn diver(vectors: ArrayView2<f64>, metric: Metric) -> Result<f64> {
    if vectors.nrows() == 0 {
        return Err(Error::Validation("diver needs at least one row".into()));
    }
    if vectors.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("diver input contains non-finite values".into()));
    }
    let mut total = 0.0;
    for i in 0..vectors.nrows() {
        for j in i + 1..vectors.nrows() {
            total += metric.distance(vectors.row(i), vectors.row(j));
        }
    }
    Ok(total)
}

/// `ceil(rho n)`, at least one.
pub fn keep_count(n: usize, rho: f64) -> usize {
    ((rho * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Validation(format!("keep fraction must lie in (0, 1], got {rho}")));
    }
    Ok(())
}

/// Uniform `ceil(rho n)`-subset of `0..n`, ascending.
pub fn random_select(n: usize, rho: f64, seed: u64) -> Result<Vec<usize>> {
    check_rho(rho)?;
    let mut idx: Vec<usize> = (0..n).collect();
    let k = if n == 0 { 0 } else { keep_count(n, rho) };
    let (chosen, _) = idx.partial_shuffle(&mut rng::rng_for(seed, &[0x7273_656c]), k);
    let mut out = chosen.to_vec();
    out.sort_unstable();
    Ok(out)
}

/// Per-sample logit `v . w + b`, scaled by `1 / temperature`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionPolicy {
    pub weights: Array1<f64>,
    pub bias: f64,
    pub temperature: f64,
}

/// The data selector and the policy are one object.
pub type DataSelector = SelectionPolicy;

impl SelectionPolicy {
    pub fn new(dim: usize, temperature: f64, seed: u64) -> Result<Self> {
        let normal = Normal::new(0.0, 0.01).expect("valid normal");
        let mut r = rng::rng_for(seed, &[0x706f6c]);
        let p = SelectionPolicy {
            weights: Array1::from_shape_fn(dim, |_| normal.sample(&mut r)),
            bias: 0.0,
            temperature,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn uniform(dim: usize, temperature: f64) -> Self {
        SelectionPolicy {
            weights: Array1::zeros(dim),
            bias: 0.0,
            temperature,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::Validation("temperature must be a positive real".into()));
        }
        if !self.bias.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Validation("policy parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Temperature-scaled logits.
    pub fn logits(&self, vectors: ArrayView2<f64>) -> Result<Array1<f64>> {
        if vectors.ncols() != self.dim() {
            return Err(Error::Validation(format!(
                "policy expects width {} but got {}",
                self.dim(),
                vectors.ncols()
            )));
        }
        Ok((vectors.dot(&self.weights) + self.bias) / self.temperature)
    }

    pub fn probabilities(&self, vectors: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.logits(vectors)?.mapv(sigmoid))
    }

    /// `log P(a)` under independent Bernoulli selections.
    pub fn log_prob(&self, vectors: ArrayView2<f64>, selected: &[usize]) -> Result<f64> {
        let z = self.logits(vectors)?;
        let mask = selection_mask(z.len(), selected);
        Ok(z.iter().zip(&mask).map(|(&z, &a)| log_sigmoid(if a { z } else { -z })).sum())
    }

    /// Gradient of [`Self::log_prob`] with respect to `(weights, bias)`.
    pub fn grad_log_prob(&self, vectors: ArrayView2<f64>, selected: &[usize]) -> Result<(Array1<f64>, f64)> {
        let p = self.probabilities(vectors)?;
        let mask = selection_mask(p.len(), selected);
        let resid: Array1<f64> = p
            .iter()
            .zip(&mask)
            .map(|(&p, &a)| (a as u8 as f64 - p) / self.temperature)
            .collect();
        Ok((vectors.t().dot(&resid), resid.sum()))
    }

    /// The policy as a one-output linear predictor (temperature folded in).
    pub fn to_predictor(&self) -> Predictor {
        let d = self.dim();
        Predictor {
            layer_sizes: vec![d, 1],
            weights: vec![(&self.weights / self.temperature).into_shape_with_order((d, 1)).expect("column")],
            biases: vec![Array1::from_elem(1, self.bias / self.temperature)],
            activation: Activation::Relu,
        }
    }

    pub fn from_predictor(p: &Predictor) -> Result<Self> {
        if p.layer_sizes.len() != 2 || p.layer_sizes[1] != 1 {
            return Err(Error::Checkpoint(format!(
                "policy checkpoints hold one linear unit, got layers {:?}",
                p.layer_sizes
            )));
        }
        let policy = SelectionPolicy {
            weights: p.weights[0].column(0).to_owned(),
            bias: p.biases[0][0],
            temperature: 1.0,
        };
        policy.validate()?;
        Ok(policy)
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

/// `log(sigmoid(z))` without overflow.
fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

fn selection_mask(n: usize, selected: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &i in selected {
        m[i] = true;
    }
    m
}

/// Perturbed top-k: score `z_i + Logistic(0, 1)` noise, keep the best
/// `ceil(rho n)`, ties to the lower index. Returns ascending indices and
/// the Bernoulli log-probability of that selection.
pub fn policy_select(
    policy: &SelectionPolicy,
    vectors: ArrayView2<f64>,
    rho: f64,
    seed: u64,
) -> Result<(Vec<usize>, f64)> {
    check_rho(rho)?;
    let n = vectors.nrows();
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let z = policy.logits(vectors)?;
    let mut r = rng::rng_for(seed, &[0x7073_656c]);
    let scores: Vec<f64> = z
        .iter()
        .map(|&z| {
            let u: f64 = r.random_range(f64::EPSILON..1.0);
            z + (u / (1.0 - u)).ln()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut chosen = order[..keep_count(n, rho)].to_vec();
    chosen.sort_unstable();
    let lp = policy.log_prob(vectors, &chosen)?;
    Ok((chosen, lp))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: Array2<f64>,
    pub action: Vec<usize>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeHistory {
    pub steps: Vec<Step>,
}

impl EpisodeHistory {
    pub fn push(&mut self, state: Array2<f64>, action: Vec<usize>, reward: f64) -> Result<()> {
        if !reward.is_finite() {
            return Err(Error::Validation(format!("reward must be finite, got {reward}")));
        }
        self.steps.push(Step { state, action, reward });
        Ok(())
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn clear(&mut self) {
        self.steps.clear();
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// `G_t = sum_{k >= t} gamma^{k-t} r_k`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut g = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        g[t] = acc;
    }
    g
}

/// Returns centered on their episode mean.
pub fn advantages(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let g = discounted_returns(rewards, gamma);
    let mean = g.iter().sum::<f64>() / g.len().max(1) as f64;
    g.iter().map(|x| x - mean).collect()
}

/// One REINFORCE ascent step averaged over the episode.
pub fn reinforce_update(
    policy: &SelectionPolicy,
    history: &EpisodeHistory,
    gamma: f64,
    policy_lr: f64,
) -> Result<SelectionPolicy> {
    if history.is_empty() {
        return Err(Error::Validation("episode history is empty".into()));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Validation(format!("discount must lie in [0, 1), got {gamma}")));
    }
    let rewards = history.rewards();
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::UpdateFailed("non-finite reward in history".into()));
    }
    let adv = advantages(&rewards, gamma);
    if adv.iter().all(|&a| a == 0.0) {
        return Ok(policy.clone());
    }
    let mut gw = Array1::zeros(policy.dim());
    let mut gb = 0.0;
    for (step, a) in history.steps.iter().zip(&adv) {
        let (w, b) = policy.grad_log_prob(step.state.view(), &step.action)?;
        gw.scaled_add(*a, &w);
        gb += a * b;
    }
    let scale = policy_lr / history.len() as f64;
    let mut next = policy.clone();
    next.weights.scaled_add(scale, &gw);
    next.bias += scale * gb;
    if next.validate().is_err() {
        return Err(Error::UpdateFailed("policy gradient produced non-finite parameters".into()));
    }
    Ok(next)
}

fn default_episodes() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectConfig {
    pub episodes: usize,
    pub batch_size: usize,
    pub keep_fraction: f64,
    pub discount: f64,
    pub policy_lr: f64,
    pub temperature: f64,
    pub metric: Metric,
    /// Constant learning rate of the one-epoch fine-tune per mini-batch.
    pub finetune_lr: f64,
    pub seed: u64,
}

impl Default for SelectConfig {
    fn default() -> Self {
        SelectConfig {
            episodes: default_episodes(),
            batch_size: 64,
            keep_fraction: 0.5,
            discount: 0.9,
            policy_lr: 0.05,
            temperature: 1.0,
            metric: Metric::Euclidean,
            finetune_lr: 0.005,
            seed: 0,
        }
    }
}

impl SelectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Validation("select batch_size must be >= 2".into()));
        }
        check_rho(self.keep_fraction)?;
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::Validation("discount must lie in [0, 1)".into()));
        }
        for (name, v) in [
            ("policy_lr", self.policy_lr),
            ("temperature", self.temperature),
            ("finetune_lr", self.finetune_lr),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Per-episode reward summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReward {
    pub episode: usize,
    /// Mean over mini-batches of `Diver / pair count`.
    pub mean_reward: f64,
    pub std_reward: f64,
    /// Mean over mini-batches of the raw `Diver`.
    pub raw_reward: f64,
}

#[derive(Debug, Clone)]
pub struct RlOutcome {
    pub predictor: Predictor,
    pub policy: SelectionPolicy,
    pub rewards: Vec<EpisodeReward>,
}

/// A failed run with the reward curve gathered before the failure.
#[derive(Debug)]
pub struct RlFailure {
    pub error: Error,
    pub partial: Vec<EpisodeReward>,
}

impl From<RlFailure> for Error {
    fn from(f: RlFailure) -> Self {
        f.error
    }
}

/// Normalized and raw reward of one selection.
pub fn selection_reward(reps: ArrayView2<f64>, selected: &[usize], metric: Metric) -> Result<(f64, f64)> {
    if selected.is_empty() {
        return Ok((0.0, 0.0));
    }
    let sub = reps.select(Axis(0), selected);
    let raw = diver(sub.view(), metric)?;
    let k = selected.len();
    let pairs = (k * (k - 1) / 2).max(1) as f64;
    Ok((raw / pairs, raw))
}

fn finetune_config(cfg: &SelectConfig, k: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 1,
        batch_size: k.max(1),
        lr: cfg.finetune_lr,
        momentum: 0.0,
        schedule: Schedule::Constant,
        mode: TrainMode::Scratch,
        augment: None,
        seed,
        ..TrainConfig::default()
    }
}

/// RL-guided selection loop; see the module docs.
pub fn run_rl_selection(
    data: &LabeledBatch,
    f: &Predictor,
    cfg: &SelectConfig,
) -> std::result::Result<RlOutcome, RlFailure> {
    let fail = |error: Error, partial: &[EpisodeReward]| RlFailure {
        error,
        partial: partial.to_vec(),
    };
    cfg.validate().map_err(|e| fail(e, &[]))?;
    let width = *f.layer_sizes.iter().rev().nth(1).unwrap_or(&f.input_dim());
    let mut policy =
        SelectionPolicy::new(width, cfg.temperature, rng::derive(cfg.seed, &[0x696e_6974])).map_err(|e| fail(e, &[]))?;
    let mut model = f.clone();
    let mut curve = Vec::with_capacity(cfg.episodes);
    if cfg.episodes == 0 {
        return Ok(RlOutcome {
            predictor: model,
            policy,
            rewards: curve,
        });
    }
    if data.len() < 2 {
        return Err(fail(Error::Validation("selection needs at least 2 samples".into()), &curve));
    }
    let mut history = EpisodeHistory::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for episode in 0..cfg.episodes {
        order.shuffle(&mut rng::rng_for(cfg.seed, &[0x6570, episode as u64]));
        let mut norm = Vec::new();
        let mut raw = Vec::new();
        for (t, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let step_seed = rng::derive(cfg.seed, &[0x7374_6570, episode as u64, t as u64]);
            let batch = data.select(chunk);
            let step = (|| -> Result<()> {
                let reps = model.encode_features(batch.features.view())?;
                let (sel, _) = policy_select(&policy, reps.view(), cfg.keep_fraction, step_seed)?;
                let (r_norm, r_raw) = selection_reward(reps.view(), &sel, cfg.metric)?;
                let (tuned, _) = train(&model, &batch.select(&sel), &finetune_config(cfg, sel.len(), step_seed))?;
                model = tuned;
                history.push(reps, sel, r_norm)?;
                norm.push(r_norm);
                raw.push(r_raw);
                Ok(())
            })();
            step.map_err(|e| fail(e, &curve))?;
        }
        policy = reinforce_update(&policy, &history, cfg.discount, cfg.policy_lr).map_err(|e| fail(e, &curve))?;
        history.clear();
        let m = norm.len() as f64;
        let mean = norm.iter().sum::<f64>() / m;
        let std = (norm.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / m).sqrt();
        curve.push(EpisodeReward {
            episode,
            mean_reward: mean,
            std_reward: std,
            raw_reward: raw.iter().sum::<f64>() / m,
        });
    }
    Ok(RlOutcome {
        predictor: model,
        policy,
        rewards: curve,
    })
}

/// The selection loop with uniform random subsets and no policy.
pub fn run_random_selection(data: &LabeledBatch, f: &Predictor, cfg: &SelectConfig) -> Result<(Predictor, Vec<EpisodeReward>)> {
    cfg.validate()?;
    let mut model = f.clone();
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for episode in 0..cfg.episodes {
        order.shuffle(&mut rng::rng_for(cfg.seed, &[0x6570, episode as u64]));
        let (mut norm, mut raw) = (Vec::new(), Vec::new());
        for (t, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let step_seed = rng::derive(cfg.seed, &[0x7374_6570, episode as u64, t as u64]);
            let batch = data.select(chunk);
            let reps = model.encode_features(batch.features.view())?;
            let sel = random_select(chunk.len(), cfg.keep_fraction, step_seed)?;
            let (r_norm, r_raw) = selection_reward(reps.view(), &sel, cfg.metric)?;
            model = train(&model, &batch.select(&sel), &finetune_config(cfg, sel.len(), step_seed))?.0;
            norm.push(r_norm);
            raw.push(r_raw);
        }
        let m = norm.len().max(1) as f64;
        let mean = norm.iter().sum::<f64>() / m;
        let std = (norm.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / m).sqrt();
        curve.push(EpisodeReward {
            episode,
            mean_reward: mean,
            std_reward: std,
            raw_reward: raw.iter().sum::<f64>() / m,
        });
    }
    Ok((model, curve))
}

/// Relative spread `std / mean` of the last `window` episode means.
pub fn tail_relative_std(curve: &[EpisodeReward], window: usize) -> Option<f64> {
    if curve.len() < window || window == 0 {
        return None;
    }
    let tail: Vec<f64> = curve[curve.len() - window..].iter().map(|r| r.mean_reward).collect();
    let mean = tail.iter().sum::<f64>() / window as f64;
    let std = (tail.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / window as f64).sqrt();
    Some(std / mean.abs())
}

pub fn write_reward_csv(curve: &[EpisodeReward], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["episode", "mean_reward", "std_reward", "raw_reward"])
        .map_err(|e| Error::csv(path, e))?;
    for r in curve {
        w.write_record([
            r.episode.to_string(),
            r.mean_reward.to_string(),
            r.std_reward.to_string(),
            r.raw_reward.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn diver_small_cases() {
        assert_eq!(diver(array![[0.0, 0.0], [3.0, 4.0]].view(), Metric::Euclidean).unwrap(), 5.0);
        let tri = diver(array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]].view(), Metric::Euclidean).unwrap();
        assert!((tri - (2.0 + 2f64.sqrt())).abs() < 1e-12);
        assert_eq!(diver(array![[1.0, 2.0]].view(), Metric::Euclidean).unwrap(), 0.0);
        assert!(diver(array![[f64::NAN, 0.0]].view(), Metric::Euclidean).is_err());
    }

    #[test]
    fn cosine_distance_of_orthogonal_rows_is_one() {
        let d = diver(array![[1.0, 0.0], [0.0, 2.0]].view(), Metric::CosineDistance).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_select_counts() {
        assert_eq!(random_select(10, 1.0, 0).unwrap(), (0..10).collect::<Vec<_>>());
        let s = random_select(128, 0.5, 3).unwrap();
        assert_eq!(s.len(), 64);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!(random_select(4, 0.0, 0).is_err());
    }

    #[test]
    fn zero_rewards_leave_policy_unchanged() {
        let p = SelectionPolicy::new(3, 1.0, 1).unwrap();
        let mut h = EpisodeHistory::default();
        for _ in 0..4 {
            h.push(Array2::ones((5, 3)), vec![0, 2], 0.0).unwrap();
        }
        assert_eq!(reinforce_update(&p, &h, 0.9, 0.1).unwrap(), p);
    }

    #[test]
    fn constant_reward_returns_are_geometric() {
        let (r, gamma, t) = (2.0, 0.7, 6);
        let g = discounted_returns(&vec![r; t], gamma);
        for (i, gi) in g.iter().enumerate() {
            let expect = r * (1.0 - gamma.powi((t - i) as i32)) / (1.0 - gamma);
            assert!((gi - expect).abs() < 1e-12);
        }
        assert!(advantages(&vec![r; t], gamma).iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn grad_log_prob_matches_finite_differences() {
        let p = SelectionPolicy::new(3, 0.7, 2).unwrap();
        let v = array![[0.3, -1.0, 0.5], [1.2, 0.1, -0.4], [-0.2, 0.8, 0.9]];
        let sel = vec![0, 2];
        let (gw, gb) = p.grad_log_prob(v.view(), &sel).unwrap();
        let h = 1e-6;
        for k in 0..3 {
            let (mut a, mut b) = (p.clone(), p.clone());
            a.weights[k] += h;
            b.weights[k] -= h;
            let fd = (a.log_prob(v.view(), &sel).unwrap() - b.log_prob(v.view(), &sel).unwrap()) / (2.0 * h);
            assert!((fd - gw[k]).abs() < 1e-6);
        }
        let (mut a, mut b) = (p.clone(), p.clone());
        a.bias += h;
        b.bias -= h;
        let fd = (a.log_prob(v.view(), &sel).unwrap() - b.log_prob(v.view(), &sel).unwrap()) / (2.0 * h);
        assert!((fd - gb).abs() < 1e-6);
    }

    #[test]
    fn policy_round_trips_through_predictor() {
        let p = SelectionPolicy::new(4, 1.0, 5).unwrap();
        let q = SelectionPolicy::from_predictor(&p.to_predictor()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn zero_episodes_is_a_no_op() {
        let f = crate::nnet::init_predictor(&[2, 4, 2], 0).unwrap();
        let data = LabeledBatch::new(Array2::zeros((4, 2)), vec![0, 1, 0, 1], vec!["a".into(); 4]).unwrap();
        let cfg = SelectConfig {
            episodes: 0,
            ..SelectConfig::default()
        };
        let out = run_rl_selection(&data, &f, &cfg).unwrap();
        assert_eq!(out.predictor, f);
        assert!(out.rewards.is_empty());
    }
}
